#include "bct/fem.hpp"

#include <cstdio>
#include <stdexcept>

#include "bct/io.hpp"

namespace bct {

namespace {

const Eigen::Matrix3d& unit_mass_12() {
  static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 2, 1, 1, 1, 2, 1, 1, 1, 2).finished() / 12.0;
  return m;
}

}  // namespace

std::vector<Eigen::Matrix3d> local_mass_blocks(const TriMesh& mesh) {
  std::vector<Eigen::Matrix3d> blocks(mesh.n_tris());
  for (int k = 0; k < mesh.n_tris(); ++k)
    blocks[k] = triangle_geometry(mesh, k).area * unit_mass_12();
  return blocks;
}

SpMat assemble_mass(const TriMesh& mesh, const DensityField& rho) {
  if (rho.size() != mesh.n_tris()) throw std::runtime_error("assemble_mass: density size mismatch");
  for (long k = 0; k < rho.size(); ++k)
    if (rho[k] <= 0)
      throw std::runtime_error("assemble_mass: non-positive density at triangle " + std::to_string(k));
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(9 * mesh.n_tris());
  for (int k = 0; k < mesh.n_tris(); ++k) {
    Eigen::Matrix3d ml = rho[k] * triangle_geometry(mesh, k).area * unit_mass_12();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        trips.emplace_back(mesh.tris(k, a), mesh.tris(k, b), ml(a, b));
  }
  SpMat M(mesh.n_nodes(), mesh.n_nodes());
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

SpMat assemble_stiffness(const TriMesh& mesh) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(9 * mesh.n_tris());
  for (int k = 0; k < mesh.n_tris(); ++k) {
    TriGeometry g = triangle_geometry(mesh, k);
    Eigen::Matrix3d kl = g.area * (g.grads * g.grads.transpose());
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        trips.emplace_back(mesh.tris(k, a), mesh.tris(k, b), kl(a, b));
  }
  SpMat K(mesh.n_nodes(), mesh.n_nodes());
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

Eigen::VectorXd boundary_load(const TriMesh& mesh, const Eigen::VectorXd& q, double a) {
  int nb = mesh.n_boundary();
  if (q.size() != nb) throw std::runtime_error("boundary_load: profile size must match ring length");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(mesh.n_nodes());
  for (int e = 0; e < nb; ++e) {
    int i = mesh.boundary[e], j = mesh.boundary[(e + 1) % nb];
    double len = (mesh.nodes.row(i) - mesh.nodes.row(j)).norm();
    // exact 1D two-point edge mass rule for piecewise-linear q
    g[i] += len / 6.0 * (2.0 * q[e] + q[(e + 1) % nb]);
    g[j] += len / 6.0 * (2.0 * q[(e + 1) % nb] + q[e]);
  }
  return a * g;
}

void dump_matrix(const SpMat& m, const std::string& path) {
  std::string out = "coo " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + " " +
                    std::to_string(m.nonZeros()) + "\n";
  char buf[64];
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it) {
      std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", (long)it.row(), (long)it.col(), it.value());
      out += buf;
    }
  io::write_file(path, out);
}

}  // namespace bct
