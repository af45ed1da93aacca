#include "bct/harmonics.hpp"

#include <Eigen/SparseCholesky>
#include <stdexcept>

namespace bct {

std::vector<Eigen::VectorXd> build_boundary_sources(const TriMesh& mesh) {
  int nb = mesh.n_boundary();
  if (nb < 3) throw std::runtime_error("build_boundary_sources: boundary ring too short");
  std::vector<Eigen::VectorXd> Ls;
  for (int a = 0; a + 1 < nb; ++a) {
    Eigen::VectorXd L = Eigen::VectorXd::Zero(mesh.n_nodes());
    L[mesh.boundary[a]] = 1.0;
    L[mesh.boundary[a + 1]] = -1.0;
    Ls.push_back(std::move(L));
  }
  return Ls;
}

namespace {

struct PinnedSolver {
  // drops node 0 row/column of K; SPD on the complement
  int n;
  Eigen::SimplicialLLT<SpMat> llt;
  explicit PinnedSolver(const SpMat& K) : n((int)K.rows()) {
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < K.outerSize(); ++k)
      for (SpMat::InnerIterator it(K, k); it; ++it)
        if (it.row() > 0 && it.col() > 0)
          trips.emplace_back((int)it.row() - 1, (int)it.col() - 1, it.value());
    SpMat Kg(n - 1, n - 1);
    Kg.setFromTriplets(trips.begin(), trips.end());
    llt.compute(Kg);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("solve_harmonic: pinned stiffness factorization failed");
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x.tail(n - 1) = llt.solve(rhs.tail(n - 1));
    return x;
  }
};

Eigen::VectorXd solve_with(const PinnedSolver& ps, const SpMat& K, const Eigen::VectorXd& L) {
  double sum = L.sum();
  if (std::abs(sum) > 1e-12)
    throw std::runtime_error("unsolvable: source has nonzero total");
  Eigen::VectorXd x = ps.solve(L);
  Eigen::VectorXd r = L - K * x;  // one iterative refinement step
  x += ps.solve(r);
  x.array() -= x.mean();
  return x;
}

}  // namespace

Eigen::VectorXd solve_harmonic(const SpMat& K, const Eigen::VectorXd& L) {
  PinnedSolver ps(K);
  return solve_with(ps, K, L);
}

HarmonicBasis build_harmonic_basis(const TriMesh& mesh, const SpMat& K) {
  auto Ls = build_boundary_sources(mesh);
  int nb = mesh.n_boundary();
  int n = mesh.n_nodes();
  HarmonicBasis hb;
  hb.n_h = nb;
  hb.phi.resize(n, nb);
  hb.L.setZero(n, nb);
  PinnedSolver ps(K);
  for (int a = 0; a < nb - 1; ++a) {
    hb.L.col(a) = Ls[a];
    hb.phi.col(a) = solve_with(ps, K, Ls[a]);
  }
  hb.phi.col(nb - 1).setOnes();  // constant target; L stays zero
  return hb;
}

}  // namespace bct
