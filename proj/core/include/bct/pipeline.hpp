#pragma once

#include <string>
#include <vector>

#include "bct/config.hpp"
#include "bct/mesh.hpp"

namespace bct {

// Quantities derived from the config once the mesh is known.
struct DerivedParams {
  double T = 0, dt_offset = 0, dt_solver = 0, nu = 0, t0 = 0;
  double t_star_box = 0;  // optical radius at the box ceiling density
  std::vector<std::string> warnings;
};

DerivedParams derive_params(const ExperimentConfig& cfg, const TriMesh& mesh);

// Artifact locations under the configured output directory.
struct StagePaths {
  std::string dir;
  std::string mesh, density, traces_dir, manifest, snapshots, formdata, harmonics, control_report,
      control_coeffs, density_est, recon_summary, score, summary;
  static StagePaths at(const std::string& dir);
  std::string trace_file(int alpha) const;
};

// Ordered stage names: mesh-gen, sample-gen, simulate, forms, harmonics,
// control, reconstruct, score.
const std::vector<std::string>& pipeline_stages();

// Runs one stage, reading its inputs from the previous stages' dump files.
// Throws ValidationError (bad stage/config), CeilingError (configured quality
// ceiling breached), or std::runtime_error (stage failure).
void run_stage(const ExperimentConfig& cfg, const std::string& stage);

// Runs all stages in order and writes summary.json. Returns the process exit
// code: 0 all ceilings met, 2 stage failure, 3 ceiling breached.
int run_pipeline(const ExperimentConfig& cfg);

}  // namespace bct
