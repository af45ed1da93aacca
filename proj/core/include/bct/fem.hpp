#pragma once

#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "bct/mesh.hpp"

namespace bct {

using SpMat = Eigen::SparseMatrix<double>;

// M(rho)_ij = sum_k rho_k * area_k/12 * [[2,1,1],[1,2,1],[1,1,2]] scattered; SPD.
SpMat assemble_mass(const TriMesh& mesh, const DensityField& rho);

// K_ij = sum_k area_k * grad gram; PSD with K*1 = 0.
SpMat assemble_stiffness(const TriMesh& mesh);

// Unit-density local blocks m^k = area_k/12 * [[2,1,1],[1,2,1],[1,1,2]].
std::vector<Eigen::Matrix3d> local_mass_blocks(const TriMesh& mesh);

// G_i = a * sum over ring edges at i of (len/6)*(2 q_i + q_neighbor); zero at
// interior nodes. q holds one value per boundary ring position.
Eigen::VectorXd boundary_load(const TriMesh& mesh, const Eigen::VectorXd& q, double a = 1.0);

// Coordinate text dump "i j value" with a one-line header.
void dump_matrix(const SpMat& m, const std::string& path);

}  // namespace bct
