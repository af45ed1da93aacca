#pragma once

#include <Eigen/Dense>
#include <vector>

#include "bct/fem.hpp"
#include "bct/mesh.hpp"

namespace bct {

// Discrete harmonic targets: phi columns solve K phi = L for boundary-supported
// zero-sum sources L (adjacent boundary differences), plus the constant function.
struct HarmonicBasis {
  Eigen::MatrixXd phi;  // n_nodes x n_h; last column == 1
  Eigen::MatrixXd L;    // n_nodes x n_h; boundary-supported; last column == 0
  int n_h = 0;          // == n_b: (n_b - 1) difference sources + the constant
};

// L_alpha = e_{ring[alpha]} - e_{ring[alpha+1]}, alpha = 0..n_b-2.
std::vector<Eigen::VectorXd> build_boundary_sources(const TriMesh& mesh);

// Minimum-norm solution of the semidefinite system K phi = L (pinned-node solve,
// one refinement step, mean removed). L must be zero-sum.
Eigen::VectorXd solve_harmonic(const SpMat& K, const Eigen::VectorXd& L);

HarmonicBasis build_harmonic_basis(const TriMesh& mesh, const SpMat& K);

}  // namespace bct
