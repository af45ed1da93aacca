#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bct/control.hpp"
#include "bct/forms.hpp"
#include "bct/harmonics.hpp"
#include "bct/mesh.hpp"

namespace bct {

// Linear system for the per-triangle densities: one row per unordered target
// pair (alpha, beta) with alpha <= beta, one column per triangle.
struct ReconstructionSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd D;  // triangle-adjacency difference operator (rows = interior edges)
  double lambda = 0.0;
  double rho_min = 0.0;
  double rho_max = 0.0;
};

struct ReconstructionResult {
  DensityField estimate;
  double residual = 0.0;  // |A*rho - b| / |b|; absolute norm when |b| = 0
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double sigma_max = 0.0;  // extreme singular values of A
  double sigma_min = 0.0;
};

// ||X||_2^2 estimated by power iteration on X^T X with a fixed start vector
// (deterministic).
double spectral_norm_sq(const Eigen::MatrixXd& X, int iters = 100);

// One +1/-1 row per pair of triangles sharing an edge.
Eigen::MatrixXd adjacency_difference_operator(const TriMesh& mesh);

// A_{(ab),k} = phi_a' m_k phi_b with m_k the unit-density local mass block;
// b_{(ab)} = c_a' C c_b.  lambda = lambda_rel * |A|_2^2 / |D|_2^2.
ReconstructionSystem assemble_density_system(const TriMesh& mesh, const HarmonicBasis& hb,
                                             const FormData& fd,
                                             const std::vector<ControlSolution>& controls,
                                             double rho_min, double rho_max,
                                             double lambda_rel = 1e-6);

// Minimizes |A rho - b|^2 + lambda |D rho|^2 over the box.  Projected gradient
// with Barzilai-Borwein steps (stop: relative objective change <= 1e-12 or
// max_iter), then an active-set refinement of the stacked least-squares system
// that is kept only when it lowers the objective.
ReconstructionResult solve_density(const ReconstructionSystem& sys, int max_iter = 100000,
                                   bool with_diagnostics = true);

// Relative l2 error; area-weighted by default.
double relative_error(const DensityField& estimate, const DensityField& truth,
                      const TriMesh& mesh, bool area_weighted = true);

}  // namespace bct
