#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bct/forms.hpp"
#include "bct/harmonics.hpp"
#include "bct/mesh.hpp"

namespace bct {

struct ControlSolution {
  Eigen::VectorXd c;  // coefficients over the control basis
  double residual = 0;  // relative l2 boundary mismatch
  double phi = 0;       // quadratic diagnostic functional
  double cnorm = 0;
  int rank = 0;  // SVD truncation rank used
};

// Stacked system for target alpha: block 1 (N rows) P c = (B_i, L_alpha) over ring
// nodes; block 2 (n_b rows) B^T c = phi_alpha on the ring. Each block scaled so its
// largest row norm is 1; block 2 additionally weighted by w2.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> assemble_control_system(
    const FormData& fd, const HarmonicBasis& hb, const TriMesh& mesh, int alpha, double w2 = 1.0);

// Minimum-norm least squares by SVD with relative truncation (default 1e-10).
Eigen::VectorXd solve_normal(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                             double cutoff = 1e-10, int* rank_out = nullptr);

double control_residual(const Eigen::VectorXd& c, const FormData& fd, const HarmonicBasis& hb,
                        const TriMesh& mesh, int alpha);

// Phi_N(c) = c'Pc - 2 sum_j c_j (B_j, L_alpha) + (phi_alpha, L_alpha).
double phi_diagnostic(const Eigen::VectorXd& c, const FormData& fd, const HarmonicBasis& hb,
                      const TriMesh& mesh, int alpha);

// Solves every target with a single SVD of the shared stacked matrix. Throws if any
// residual exceeds residual_ceiling (> 0 enables the check).
std::vector<ControlSolution> solve_all_controls(const FormData& fd, const HarmonicBasis& hb,
                                                const TriMesh& mesh, double cutoff = 1e-10,
                                                double w2 = 1.0, double residual_ceiling = 0);

}  // namespace bct
