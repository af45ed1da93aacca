#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <vector>

#include "bct/io.hpp"
#include "bct/mesh.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bct;
using testutil::Lcg;

namespace {
constexpr double kPi = 3.14159265358979323846;

// Independent all-pairs shortest path (Floyd-Warshall) for the optical radius.
double brute_force_radius(const TriMesh& mesh, const DensityField& rho) {
  int n = mesh.n_nodes();
  std::map<std::pair<int, int>, std::vector<int>> edge_tris;
  for (int k = 0; k < mesh.n_tris(); ++k)
    for (int e = 0; e < 3; ++e) {
      int a = mesh.tris(k, e), b = mesh.tris(k, (e + 1) % 3);
      edge_tris[{std::min(a, b), std::max(a, b)}].push_back(k);
    }
  const double inf = 1e300;
  std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
  for (int i = 0; i < n; ++i) d[i][i] = 0;
  for (auto& [e, ts] : edge_tris) {
    double mean = 0;
    for (int k : ts) mean += rho[k];
    mean /= (double)ts.size();
    double w = (mesh.nodes.row(e.first) - mesh.nodes.row(e.second)).norm() * std::sqrt(mean);
    d[e.first][e.second] = std::min(d[e.first][e.second], w);
    d[e.second][e.first] = d[e.first][e.second];
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  double radius = 0;
  for (int i = 0; i < n; ++i) {
    double best = inf;
    for (int b : mesh.boundary) best = std::min(best, d[i][b]);
    radius = std::max(radius, best);
  }
  return radius;
}

}  // namespace

TEST_CASE("single-ring fan mesh has center plus ring") {
  TriMesh m = generate_disk_mesh(1, 8);
  CHECK(m.n_nodes() == 9);
  CHECK(m.n_tris() == 8);
  CHECK(m.n_boundary() == 8);
  CHECK_NOTHROW(validate_mesh(m, true));
}

TEST_CASE("triangle areas positive, total in [0.95 pi, pi] for fine rings") {
  for (auto [r, nb] : {std::pair{2, 12}, {4, 32}, {6, 24}, {8, 48}}) {
    TriMesh m = generate_disk_mesh(r, nb);
    Eigen::VectorXd areas = triangle_areas(m);
    CHECK(areas.minCoeff() > 0);
    double total = areas.sum();
    CHECK(total >= 0.95 * kPi);
    CHECK(total <= kPi);
  }
  // nested proportional refinement increases the covered area monotonically
  double a1 = triangle_areas(generate_disk_mesh(2, 16)).sum();
  double a2 = triangle_areas(generate_disk_mesh(4, 32)).sum();
  double a3 = triangle_areas(generate_disk_mesh(8, 64)).sum();
  CHECK(a1 < a2);
  CHECK(a2 < a3);
}

TEST_CASE("boundary ring: unit circle nodes, simple cycle, edge sharing") {
  TriMesh m = generate_disk_mesh(4, 32);
  REQUIRE(m.n_boundary() == 32);
  for (int b : m.boundary) CHECK(std::abs(m.nodes.row(b).norm() - 1.0) <= 1e-9);

  // independent edge census: interior edges in exactly 2 triangles, ring edges in 1
  std::map<std::pair<int, int>, int> count;
  for (int k = 0; k < m.n_tris(); ++k)
    for (int e = 0; e < 3; ++e) {
      int a = m.tris(k, e), b = m.tris(k, (e + 1) % 3);
      count[{std::min(a, b), std::max(a, b)}]++;
    }
  std::map<std::pair<int, int>, bool> ring_edge;
  for (int e = 0; e < m.n_boundary(); ++e) {
    int a = m.boundary[e], b = m.boundary[(e + 1) % m.n_boundary()];
    ring_edge[{std::min(a, b), std::max(a, b)}] = true;
  }
  for (auto& [edge, c] : count) {
    CHECK(c <= 2);
    CHECK((c == 1) == (ring_edge.count(edge) > 0));
  }
}

TEST_CASE("unit right triangle geometry") {
  TriMesh m = testutil::unit_right_triangle();
  TriGeometry g = triangle_geometry(m, 0);
  CHECK(g.area == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.grads(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(g.grads(0, 1) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(g.grads(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.grads(1, 1) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(g.grads(2, 0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(g.grads(2, 1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("P1 gradients sum to zero on every triangle") {
  TriMesh m = generate_disk_mesh(4, 20);
  for (int k = 0; k < m.n_tris(); ++k) {
    TriGeometry g = triangle_geometry(m, k);
    CHECK(g.area > 0);
    Eigen::RowVector2d s = g.grads.colwise().sum();
    CHECK(s.cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("mesh save/load round trip is the identity") {
  std::string dir = testutil::scratch_dir("mesh_rt");
  TriMesh m = generate_disk_mesh(3, 16);
  save_mesh(m, dir + "/m.txt");
  int reoriented = -1;
  TriMesh m2 = load_mesh(dir + "/m.txt", &reoriented);
  CHECK(reoriented == 0);
  REQUIRE(m2.n_nodes() == m.n_nodes());
  REQUIRE(m2.n_tris() == m.n_tris());
  CHECK((m2.nodes - m.nodes).cwiseAbs().maxCoeff() == 0.0);  // 17 digits round-trip exactly
  CHECK((m2.tris - m.tris).cwiseAbs().maxCoeff() == 0);
  CHECK(m2.boundary == m.boundary);
}

TEST_CASE("loader rejects a triangle referencing a missing node") {
  std::string dir = testutil::scratch_dir("mesh_badidx");
  std::ofstream f(dir + "/bad.txt");
  f << "bcmesh 1\nnodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 5\nboundary 3\n0 1 2\n";
  f.close();
  CHECK_THROWS_WITH_AS(load_mesh(dir + "/bad.txt"), doctest::Contains("validation error"),
                       std::runtime_error);
}

TEST_CASE("loader reorients clockwise triangles and reports the count") {
  std::string dir = testutil::scratch_dir("mesh_cw");
  std::ofstream f(dir + "/cw.txt");
  f << "bcmesh 1\nnodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 2 1\nboundary 3\n0 1 2\n";
  f.close();
  int reoriented = 0;
  TriMesh m = load_mesh(dir + "/cw.txt", &reoriented);
  CHECK(reoriented == 1);
  CHECK(triangle_geometry(m, 0).area > 0);
}

TEST_CASE("malformed header is a parse error naming the line") {
  std::string dir = testutil::scratch_dir("mesh_hdr");
  std::ofstream(dir + "/h.txt") << "wrong header\n";
  CHECK_THROWS_WITH_AS(load_mesh(dir + "/h.txt"), doctest::Contains(":1: parse error"),
                       std::runtime_error);
}

TEST_CASE("density save/load round trip and positivity check") {
  std::string dir = testutil::scratch_dir("density_rt");
  TriMesh m = generate_disk_mesh(2, 12);
  Lcg rng(7);
  DensityField rho(m.n_tris());
  for (int k = 0; k < m.n_tris(); ++k) rho[k] = rng.uniform(0.5, 3.0);
  save_density(rho, dir + "/rho.txt");
  DensityField r2 = load_density(dir + "/rho.txt");
  REQUIRE(r2.size() == rho.size());
  CHECK((r2 - rho).cwiseAbs().maxCoeff() == 0.0);

  std::ofstream(dir + "/bad.txt") << "bcdensity 1\n2\n1.0\n-0.5\n";
  CHECK_THROWS_WITH_AS(load_density(dir + "/bad.txt"), doctest::Contains("non-positive"),
                       std::runtime_error);
}

TEST_CASE("optical radius: unit density lands in [1.0, 1.15]") {
  for (auto [r, nb] : {std::pair{4, 24}, {6, 24}, {6, 48}}) {
    TriMesh m = generate_disk_mesh(r, nb);
    DensityField one = DensityField::Ones(m.n_tris());
    double t = estimate_optical_radius(m, one);
    CHECK(t >= 1.0);
    CHECK(t <= 1.15);
  }
}

TEST_CASE("optical radius: rho=4 gives exactly twice rho=1") {
  TriMesh m = generate_disk_mesh(5, 24);
  DensityField one = DensityField::Ones(m.n_tris());
  double t1 = estimate_optical_radius(m, one);
  double t4 = estimate_optical_radius(m, 4.0 * one);
  CHECK(t4 == 2.0 * t1);  // sqrt(4) and the x2 edge weights are exact in binary
}

TEST_CASE("optical radius: random density bracketed, monotone, sqrt-c scaling") {
  TriMesh m = generate_disk_mesh(4, 20);
  Lcg rng(11);
  DensityField rho(m.n_tris());
  for (int k = 0; k < m.n_tris(); ++k) rho[k] = rng.uniform(1.0, 4.0);
  DensityField one = DensityField::Ones(m.n_tris());
  double t1 = estimate_optical_radius(m, one);
  double t4 = estimate_optical_radius(m, 4.0 * one);
  double tr = estimate_optical_radius(m, rho);
  CHECK(tr >= t1 - 1e-12);
  CHECK(tr <= t4 + 1e-12);

  DensityField bigger = rho;
  for (int k = 0; k < m.n_tris(); ++k) bigger[k] += rng.uniform(0.0, 1.0);
  CHECK(estimate_optical_radius(m, bigger) >= tr - 1e-15);

  double c = 1.7;
  double ts = estimate_optical_radius(m, c * rho);
  CHECK(ts == doctest::Approx(std::sqrt(c) * tr).epsilon(1e-12));
}

TEST_CASE("optical radius matches brute-force all-pairs search") {
  TriMesh m = generate_disk_mesh(3, 12);
  DensityField one = DensityField::Ones(m.n_tris());
  CHECK(estimate_optical_radius(m, one) ==
        doctest::Approx(brute_force_radius(m, one)).epsilon(1e-12));
  Lcg rng(23);
  for (int trial = 0; trial < 2; ++trial) {
    DensityField rho(m.n_tris());
    for (int k = 0; k < m.n_tris(); ++k) rho[k] = rng.uniform(1.0, 4.0);
    CHECK(estimate_optical_radius(m, rho) ==
          doctest::Approx(brute_force_radius(m, rho)).epsilon(1e-12));
  }
}

TEST_CASE("adjacent triangle pairs enumerate interior edges") {
  for (auto [r, nb] : {std::pair{1, 8}, {4, 20}}) {
    TriMesh m = generate_disk_mesh(r, nb);
    auto pairs = adjacent_triangle_pairs(m);
    CHECK((int)pairs.size() == (3 * m.n_tris() - m.n_boundary()) / 2);
    for (auto& p : pairs) {
      // the two triangles share exactly one edge (two nodes)
      int shared = 0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          if (m.tris(p[0], a) == m.tris(p[1], b)) ++shared;
      CHECK(shared == 2);
    }
  }
}
