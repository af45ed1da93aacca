// bctomo: acoustic density tomography by boundary control.
//
//   bctomo <stage|pipeline> --config <path> [--jobs N] [--oracle]
//
// Stages: mesh-gen, sample-gen, simulate, forms, harmonics, control,
// reconstruct, score.  `pipeline` runs all of them and writes summary.json.
// Exit codes: 0 success, 1 validation error, 2 stage failure, 3 configured
// quality ceiling breached.

#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "bct/config.hpp"
#include "bct/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"acoustic density tomography by boundary control"};
  app.require_subcommand(1);

  std::string config_path;
  int jobs = 0;
  bool oracle = false;

  std::vector<std::string> commands = bct::pipeline_stages();
  commands.insert(commands.begin(), "pipeline");
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(
        name, name == "pipeline" ? "run every stage in order" : "run the " + name + " stage");
    sub->add_option("--config", config_path, "experiment configuration (JSON)")->required();
    sub->add_option("--jobs", jobs, "worker count for parallel stages");
    sub->add_flag("--oracle", oracle, "retain interior fields for diagnostics");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    bct::ExperimentConfig cfg = bct::load_config(config_path);
    if (jobs > 0) cfg.jobs = jobs;
    if (oracle) cfg.oracle_mode = true;
    if (cmd == "pipeline") return bct::run_pipeline(cfg);
    bct::run_stage(cfg, cmd);
    return 0;
  } catch (const bct::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 1;
  } catch (const bct::CeilingError& e) {
    std::fprintf(stderr, "ceiling breached: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s failed: %s\n", cmd.c_str(), e.what());
    return 2;
  }
}
