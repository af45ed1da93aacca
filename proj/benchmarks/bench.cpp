#include <benchmark/benchmark.h>

#include "bct/fem.hpp"
#include "bct/forms.hpp"
#include "bct/mesh.hpp"
#include "bct/reconstruct.hpp"
#include "bct/wavesim.hpp"

namespace {

bct::TriMesh make_mesh(int rings) { return bct::generate_disk_mesh(rings, 4 * rings); }

void BM_AssembleMass(benchmark::State& state) {
  auto mesh = make_mesh(static_cast<int>(state.range(0)));
  bct::DensityField rho = bct::DensityField::Ones(mesh.n_tris());
  for (auto _ : state) benchmark::DoNotOptimize(bct::assemble_mass(mesh, rho));
}
BENCHMARK(BM_AssembleMass)->Arg(6)->Arg(16)->Arg(32);

void BM_AssembleStiffness(benchmark::State& state) {
  auto mesh = make_mesh(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(bct::assemble_stiffness(mesh));
}
BENCHMARK(BM_AssembleStiffness)->Arg(6)->Arg(16)->Arg(32);

void BM_NewmarkSimulate(benchmark::State& state) {
  auto mesh = make_mesh(static_cast<int>(state.range(0)));
  bct::DensityField rho = bct::DensityField::Ones(mesh.n_tris());
  auto M = bct::assemble_mass(mesh, rho);
  auto K = bct::assemble_stiffness(mesh);
  const double dt = 1e-3;
  bct::NewmarkSolver solver(M, K, dt);
  bct::RickerWavelet w{4.0, 1.5 / 4.0};
  Eigen::VectorXd q = Eigen::VectorXd::Zero(mesh.n_nodes());
  q[mesh.boundary[0]] = 1.0;
  Eigen::VectorXd load = bct::boundary_load(mesh, q);
  const int nsteps = 500;
  Eigen::VectorXd amp(nsteps + 1);
  for (int k = 0; k <= nsteps; ++k) amp[k] = w(k * dt);
  bct::NewmarkSolver::Request req;
  req.ring = &mesh.boundary;
  for (auto _ : state) benchmark::DoNotOptimize(solver.simulate(load, amp, nsteps, req));
  state.SetItemsProcessed(state.iterations() * nsteps);
}
BENCHMARK(BM_NewmarkSimulate)->Arg(6)->Arg(12);

struct FormFixture {
  bct::TriMesh mesh = bct::generate_disk_mesh(4, 16);
  bct::ControlBasis basis;
  bct::TraceSet traces;
  FormFixture() {
    bct::DensityField rho = bct::DensityField::Ones(mesh.n_tris());
    double T = 1.2, nu = 3.5 / T;
    basis = {bct::RickerWavelet{nu, 1.5 / nu}, T / 4, 4, mesh.n_boundary()};
    traces = bct::generate_all_traces(mesh, rho, basis, basis.dt_offset / 20);
  }
};

void BM_BuildFormData(benchmark::State& state) {
  static FormFixture fx;
  for (auto _ : state) benchmark::DoNotOptimize(bct::build_form_data(fx.mesh, fx.basis, fx.traces));
}
BENCHMARK(BM_BuildFormData);

void BM_TruncatedSvdSolve(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0)), n = m / 2;
  Eigen::MatrixXd A(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = std::cos(0.37 * i + 1.7 * j);
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(m, -1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(bct::solve_normal(A, b, 1e-10));
}
BENCHMARK(BM_TruncatedSvdSolve)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
