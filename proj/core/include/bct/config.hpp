#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "bct/samples.hpp"

namespace bct {

// Bad configuration or malformed input (CLI exit code 1).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A configured quality ceiling was breached (CLI exit code 3).
struct CeilingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // mesh
  int n_rings = 6;
  int n_boundary = 24;

  SampleSpec sample;

  // wavelet; zero means "derive": nu = nu_mult * 3.5 / T, t0 = 1.5 / nu
  double nu = 0.0;
  double t0 = 0.0;
  double nu_mult = 1.0;

  // times; T = 0 means T_factor * estimated T*(rho_max)
  double T = 0.0;
  double T_factor = 1.2;
  int n_t = 8;        // T / dt_offset
  int substeps = 20;  // dt_offset / dt_solver

  // control
  double svd_cutoff = 1e-10;
  double block_weight = 1.0;
  double residual_ceiling = 0.0;  // 0 disables

  // reconstruction
  double lambda_rel = 1e-6;
  double box_lo = 0.5, box_hi = 2.0;
  bool area_weighted_delta = true;
  double delta_ceiling = 0.0;  // 0 disables

  bool oracle_mode = false;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Parses the JSON document at `path`; throws ValidationError on malformed or
// inconsistent settings (e.g. T / dt not an integer).
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text, const std::string& origin = "config");
void validate_config(const ExperimentConfig& cfg);

}  // namespace bct
