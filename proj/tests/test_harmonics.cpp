#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <set>

#include "bct/fem.hpp"
#include "bct/harmonics.hpp"
#include "bct/mesh.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bct;
using testutil::Lcg;

namespace {

DensityField random_density(const TriMesh& mesh, uint64_t seed) {
  Lcg rng(seed);
  DensityField rho(mesh.n_tris());
  for (int k = 0; k < mesh.n_tris(); ++k) rho[k] = rng.uniform(0.5, 3.0);
  return rho;
}

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& vs) {
  Eigen::MatrixXd S((long)vs.size(), vs[0].size());
  for (size_t a = 0; a < vs.size(); ++a) S.row((long)a) = vs[a];
  return S;
}

}  // namespace

TEST_CASE("boundary sources: adjacent +1/-1 pairs, one per consecutive ring slot") {
  TriMesh m = generate_disk_mesh(1, 4);  // 4 boundary nodes
  auto Ls = build_boundary_sources(m);
  REQUIRE(Ls.size() == 3);
  for (int a = 0; a < 3; ++a) {
    const auto& L = Ls[a];
    REQUIRE(L.size() == m.n_nodes());
    CHECK(L[m.boundary[a]] == 1.0);
    CHECK(L[m.boundary[a + 1]] == -1.0);
    int nonzeros = 0;
    for (long i = 0; i < L.size(); ++i)
      if (L[i] != 0.0) ++nonzeros;
    CHECK(nonzeros == 2);
    CHECK(L.sum() == 0.0);  // exact: 1 + (-1)
  }
}

TEST_CASE("boundary sources: zero-sum and boundary-supported on a ring mesh") {
  TriMesh m = generate_disk_mesh(3, 12);
  auto Ls = build_boundary_sources(m);
  REQUIRE((int)Ls.size() == m.n_boundary() - 1);
  std::set<int> ring(m.boundary.begin(), m.boundary.end());
  for (const auto& L : Ls) {
    CHECK(L.sum() == 0.0);
    for (long i = 0; i < L.size(); ++i)
      if (L[i] != 0.0) CHECK(ring.count((int)i) == 1);
  }
}

TEST_CASE("boundary sources: stacked family has full rank N_b - 1") {
  for (int nb : {4, 12}) {
    TriMesh m = generate_disk_mesh(nb == 4 ? 1 : 3, nb);
    auto Ls = build_boundary_sources(m);
    Eigen::MatrixXd S = stack_rows(Ls);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);
    const auto& sv = svd.singularValues();
    REQUIRE(sv.size() == nb - 1);
    int rank = 0;
    for (long k = 0; k < sv.size(); ++k)
      if (sv[k] > 1e-12 * sv[0]) ++rank;
    CHECK(rank == nb - 1);
  }
}

TEST_CASE("solve_harmonic: zero source gives the zero function exactly") {
  TriMesh m = generate_disk_mesh(3, 12);
  SpMat K = assemble_stiffness(m);
  Eigen::VectorXd phi = solve_harmonic(K, Eigen::VectorXd::Zero(m.n_nodes()));
  for (long i = 0; i < phi.size(); ++i) CHECK(phi[i] == 0.0);
}

TEST_CASE("solve_harmonic: residual, zero mean, and dense pseudoinverse oracle") {
  TriMesh m = generate_disk_mesh(3, 12);
  DensityField rho = random_density(m, 42);
  (void)rho;  // harmonic solve uses only the stiffness (density-free)
  SpMat K = assemble_stiffness(m);
  auto Ls = build_boundary_sources(m);

  // independent oracle: minimum-norm solution through a dense SVD pseudoinverse
  Eigen::MatrixXd Kd = Eigen::MatrixXd(K);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Kd, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  auto pinv_apply = [&](const Eigen::VectorXd& rhs) {
    Eigen::VectorXd y = svd.matrixU().transpose() * rhs;
    for (long k = 0; k < sv.size(); ++k) y[k] = (sv[k] > 1e-12 * sv[0]) ? y[k] / sv[k] : 0.0;
    return Eigen::VectorXd(svd.matrixV() * y);
  };

  for (const auto& L : Ls) {
    Eigen::VectorXd phi = solve_harmonic(K, L);
    CHECK((K * phi - L).norm() / L.norm() <= 1e-10);
    CHECK(std::abs(phi.mean()) <= 1e-14);
    Eigen::VectorXd ref = pinv_apply(L);  // orthogonal to ker K = constants => zero mean
    CHECK((phi - ref).norm() <= 1e-10 * ref.norm());
  }
}

TEST_CASE("solve_harmonic: rejects sources with nonzero total") {
  TriMesh m = generate_disk_mesh(2, 10);
  SpMat K = assemble_stiffness(m);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(m.n_nodes());
  bad[m.boundary[0]] = 1.0;  // sums to 1
  CHECK_THROWS_WITH_AS(solve_harmonic(K, bad), "unsolvable: source has nonzero total",
                       std::runtime_error);
}

TEST_CASE("harmonic basis: constant appended last, sources preserved") {
  TriMesh m = generate_disk_mesh(3, 12);
  SpMat K = assemble_stiffness(m);
  HarmonicBasis hb = build_harmonic_basis(m, K);
  int nb = m.n_boundary();
  REQUIRE(hb.n_h == nb);
  REQUIRE(hb.phi.rows() == m.n_nodes());
  REQUIRE(hb.phi.cols() == nb);
  REQUIRE(hb.L.cols() == nb);

  for (long i = 0; i < hb.phi.rows(); ++i) {
    CHECK(hb.phi(i, nb - 1) == 1.0);
    CHECK(hb.L(i, nb - 1) == 0.0);
  }
  auto Ls = build_boundary_sources(m);
  for (int a = 0; a < nb - 1; ++a) {
    CHECK((hb.L.col(a) - Ls[a]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(hb.phi.col(a).mean()) <= 1e-14);
  }

  // the constant really is in the kernel of K
  double kscale = 0;
  for (int k = 0; k < K.outerSize(); ++k)
    for (SpMat::InnerIterator it(K, k); it; ++it) kscale = std::max(kscale, std::abs(it.value()));
  CHECK((K * Eigen::VectorXd::Ones(m.n_nodes())).cwiseAbs().maxCoeff() <= 1e-12 * kscale);
}

TEST_CASE("harmonic basis: linear independence of {phi_a} together with the constant") {
  TriMesh m = generate_disk_mesh(3, 12);
  HarmonicBasis hb = build_harmonic_basis(m, assemble_stiffness(m));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(hb.phi);
  const auto& sv = svd.singularValues();
  CHECK(sv[sv.size() - 1] > 1e-12 * sv[0]);
}

TEST_CASE("harmonic basis: discrete harmonicity at interior nodes") {
  TriMesh m = generate_disk_mesh(3, 12);
  SpMat K = assemble_stiffness(m);
  HarmonicBasis hb = build_harmonic_basis(m, K);
  std::set<int> ring(m.boundary.begin(), m.boundary.end());
  for (int a = 0; a < hb.n_h - 1; ++a) {
    Eigen::VectorXd r = K * hb.phi.col(a);
    double Lnorm = hb.L.col(a).norm();
    for (int i = 0; i < m.n_nodes(); ++i)
      if (!ring.count(i)) CHECK(std::abs(r[i]) <= 1e-10 * Lnorm);
  }
}

TEST_CASE("harmonic basis: bit-for-bit reproducible") {
  TriMesh m = generate_disk_mesh(3, 12);
  SpMat K = assemble_stiffness(m);
  HarmonicBasis h1 = build_harmonic_basis(m, K);
  HarmonicBasis h2 = build_harmonic_basis(m, K);
  CHECK((h1.phi - h2.phi).cwiseAbs().maxCoeff() == 0.0);
  CHECK((h1.L - h2.L).cwiseAbs().maxCoeff() == 0.0);
}
