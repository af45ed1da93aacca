#include "bct/wavesim.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace bct {

double RickerWavelet::operator()(double t) const {
  if (t < 0.0 || t > window_end()) return 0.0;
  double arg = M_PI * nu * (t - t0);
  double a2 = arg * arg;
  return (1.0 - 2.0 * a2) * std::exp(-a2);
}

NewmarkSolver::NewmarkSolver(const SpMat& M, const SpMat& K, double dt)
    : M_(M), K_(K), dt_(dt) {
  SpMat S = M_ + (dt * dt / 4.0) * K_;
  llt_S_.compute(S);
  if (llt_S_.info() != Eigen::Success)
    throw std::runtime_error("NewmarkSolver: factorization of M + dt^2/4 K failed (not SPD)");
  llt_M_.compute(M_);
  if (llt_M_.info() != Eigen::Success)
    throw std::runtime_error("NewmarkSolver: factorization of M failed (not SPD)");
}

NewmarkSolver::Result NewmarkSolver::simulate(const Eigen::VectorXd& w, const Eigen::VectorXd& amp,
                                              int nsteps, const Request& req) const {
  if (amp.size() < nsteps + 1) throw std::runtime_error("simulate: amplitude series too short");
  const int n = (int)M_.rows();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd a = llt_M_.solve(amp[0] * w);

  Result res;
  if (req.ring) {
    res.trace.setZero((int)req.ring->size(), nsteps + 1);
  }
  if (req.record_energy) res.energy.assign(nsteps + 1, 0.0);
  res.snap_u.resize(req.snap_steps.size());
  res.snap_v.resize(req.snap_steps.size());
  auto record_energy = [&](int k) {
    if (req.record_energy) res.energy[k] = 0.5 * v.dot(M_ * v) + 0.5 * u.dot(K_ * u);
  };
  auto record_snap = [&](int k) {
    for (size_t s = 0; s < req.snap_steps.size(); ++s)
      if (req.snap_steps[s] == k) {
        res.snap_u[s] = u;
        res.snap_v[s] = v;
      }
  };
  record_energy(0);
  record_snap(0);

  const double q = dt_ * dt_ / 4.0;
  Eigen::VectorXd upred(n), a1(n);
  for (int k = 1; k <= nsteps; ++k) {
    upred = u + dt_ * v + q * a;
    a1 = llt_S_.solve(amp[k] * w - K_ * upred);
    u = upred + q * a1;
    v += (dt_ / 2.0) * (a + a1);
    a.swap(a1);
    if (req.ring)
      for (size_t r = 0; r < req.ring->size(); ++r) res.trace((int)r, k) = u[(*req.ring)[r]];
    record_energy(k);
    record_snap(k);
  }
  return res;
}

Eigen::VectorXd base_amplitude_series(const ControlBasis& basis, double dt_solver, int n_steps) {
  Eigen::VectorXd amp(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k) amp[k] = basis.wavelet(k * dt_solver);
  return amp;
}

TraceSet generate_all_traces(const TriMesh& mesh, const DensityField& rho,
                             const ControlBasis& basis, double dt_solver, bool oracle, int jobs) {
  double ratio = basis.dt_offset / dt_solver;
  int substeps = (int)std::lround(ratio);
  if (substeps < 1 || std::abs(ratio - substeps) > 1e-9 * substeps)
    throw std::runtime_error("generate_all_traces: dt_solver must divide the control offset exactly");

  SpMat M = assemble_mass(mesh, rho);
  SpMat K = assemble_stiffness(mesh);
  NewmarkSolver solver(M, K, dt_solver);

  const int nT = basis.n_t * substeps;
  const int n2T = 2 * nT;
  Eigen::VectorXd amp = base_amplitude_series(basis, dt_solver, n2T);

  TraceSet ts;
  ts.dt_solver = dt_solver;
  ts.n_steps = n2T;
  ts.substeps = substeps;
  ts.n_t = basis.n_t;
  ts.base.resize(basis.n_b);
  if (oracle) {
    ts.snap_u.resize(basis.n_b);
    ts.snap_v.resize(basis.n_b);
  }

  NewmarkSolver::Request req;
  req.ring = &mesh.boundary;
  if (oracle)
    for (int j = 0; j < basis.n_t; ++j) req.snap_steps.push_back(nT - j * substeps);

  auto run_one = [&](int alpha) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(basis.n_b);
    q[alpha] = basis.qscale(alpha);
    Eigen::VectorXd w = boundary_load(mesh, q);
    auto res = solver.simulate(w, amp, n2T, req);
    ts.base[alpha] = std::move(res.trace);
    if (oracle) {
      ts.snap_u[alpha].resize(mesh.n_nodes(), basis.n_t);
      ts.snap_v[alpha].resize(mesh.n_nodes(), basis.n_t);
      for (int j = 0; j < basis.n_t; ++j) {
        ts.snap_u[alpha].col(j) = res.snap_u[j];
        ts.snap_v[alpha].col(j) = res.snap_v[j];
      }
    }
  };

  if (jobs <= 1) {
    for (int alpha = 0; alpha < basis.n_b; ++alpha) run_one(alpha);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    int workers = std::min(jobs, basis.n_b);
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (int alpha; (alpha = next.fetch_add(1)) < basis.n_b;) run_one(alpha);
      });
    for (auto& th : pool) th.join();
  }
  return ts;
}

Eigen::MatrixXd shifted_trace(const TraceSet& traces, int alpha, int j) {
  const Eigen::MatrixXd& b = traces.base.at(alpha);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(b.rows(), b.cols());
  int m = j * traces.substeps;
  if (m < b.cols()) out.rightCols(b.cols() - m) = b.leftCols(b.cols() - m);
  return out;
}

Eigen::MatrixXd simulate_control_direct(const TriMesh& mesh, const DensityField& rho,
                                        const ControlBasis& basis, int alpha, int j,
                                        double dt_solver) {
  double ratio = basis.dt_offset / dt_solver;
  int substeps = (int)std::lround(ratio);
  if (substeps < 1 || std::abs(ratio - substeps) > 1e-9 * substeps)
    throw std::runtime_error("simulate_control_direct: dt_solver must divide the control offset");
  SpMat M = assemble_mass(mesh, rho);
  SpMat K = assemble_stiffness(mesh);
  NewmarkSolver solver(M, K, dt_solver);
  const int n2T = 2 * basis.n_t * substeps;
  Eigen::VectorXd amp(n2T + 1);
  for (int k = 0; k <= n2T; ++k) amp[k] = basis.amplitude(j, k * dt_solver);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(basis.n_b);
  q[alpha] = basis.qscale(alpha);
  Eigen::VectorXd w = boundary_load(mesh, q);
  NewmarkSolver::Request req;
  req.ring = &mesh.boundary;
  return solver.simulate(w, amp, n2T, req).trace;
}

}  // namespace bct
