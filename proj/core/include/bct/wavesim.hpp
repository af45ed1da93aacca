#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <vector>

#include "bct/fem.hpp"
#include "bct/mesh.hpp"

namespace bct {

struct RickerWavelet {
  double nu;  // center frequency
  double t0;  // delay; default choice 1.5/nu
  // r(t) = (1 - 2 pi^2 nu^2 (t-t0)^2) exp(-pi^2 nu^2 (t-t0)^2), hard-truncated
  // to exact zero outside [0, t0 + 2/nu].
  double operator()(double t) const;
  double window_end() const { return t0 + 2.0 / nu; }
};

// f_{j,alpha}(x,t) = r(t - j*dt_offset) q_alpha(x), alpha = 0..n_b-1, j = 0..n_t-1.
// Flat index i = alpha*n_t + j. T = n_t * dt_offset.
struct ControlBasis {
  RickerWavelet wavelet;
  double dt_offset;
  int n_t;
  int n_b;
  Eigen::VectorXd profile_scale;  // optional amplitude on q_alpha; empty = unit profiles
  double T() const { return n_t * dt_offset; }
  int size() const { return n_b * n_t; }
  int flat_index(int alpha, int j) const { return alpha * n_t + j; }
  double shift(int j) const { return j * dt_offset; }
  // amplitude at time t of the j-th shift
  double amplitude(int j, double t) const { return wavelet(t - shift(j)); }
  double qscale(int alpha) const { return profile_scale.size() ? profile_scale[alpha] : 1.0; }
};

// Trace data over [0, 2T]: one base simulation per boundary profile; the traces of
// shifted controls are exact sample translations of the base trace.
struct TraceSet {
  std::vector<Eigen::MatrixXd> base;  // per alpha: n_boundary x (n_steps+1)
  double dt_solver = 0;
  int n_steps = 0;         // steps covering [0, 2T]
  int substeps = 0;        // dt_offset / dt_solver (exact integer)
  int n_t = 0;
  // oracle mode only: terminal snapshots U(T - j dt), U_t(T - j dt), per alpha
  // columns j = 0..n_t-1; empty otherwise.
  std::vector<Eigen::MatrixXd> snap_u, snap_v;
};

class NewmarkSolver {
 public:
  // Factors S = M + (dt^2/4) K and M once; both reused across steps and controls.
  NewmarkSolver(const SpMat& M, const SpMat& K, double dt);

  struct Request {
    const std::vector<int>* ring = nullptr;      // record these nodes every step
    std::vector<int> snap_steps;                 // record full (u, v) at these steps
    bool record_energy = false;                  // E = .5 v'Mv + .5 u'Ku per step
  };
  struct Result {
    Eigen::MatrixXd trace;                       // ring-size x (nsteps+1)
    std::vector<Eigen::VectorXd> snap_u, snap_v; // aligned with Request::snap_steps
    std::vector<double> energy;                  // size nsteps+1 when requested
  };

  // M u'' + K u = amp[k] * w, zero initial data; amp has nsteps+1 samples.
  Result simulate(const Eigen::VectorXd& w, const Eigen::VectorXd& amp, int nsteps,
                  const Request& req) const;

  double dt() const { return dt_; }

 private:
  const SpMat M_, K_;
  double dt_;
  Eigen::SimplicialLLT<SpMat> llt_S_, llt_M_;
};

// Samples amplitude of the j=0 control on the solver grid of n_steps+1 points.
Eigen::VectorXd base_amplitude_series(const ControlBasis& basis, double dt_solver, int n_steps);

// Runs the n_b base simulations over [0, 2T]. dt_solver must divide dt_offset exactly.
// oracle: also record terminal full-field snapshots. jobs: concurrent simulations.
TraceSet generate_all_traces(const TriMesh& mesh, const DensityField& rho,
                             const ControlBasis& basis, double dt_solver, bool oracle = false,
                             int jobs = 1);

// Trace of control (alpha, j) as the exact translation of the base trace, zero-padded.
Eigen::MatrixXd shifted_trace(const TraceSet& traces, int alpha, int j);

// Independent verification: simulate control (alpha, j) directly.
Eigen::MatrixXd simulate_control_direct(const TriMesh& mesh, const DensityField& rho,
                                        const ControlBasis& basis, int alpha, int j,
                                        double dt_solver);

}  // namespace bct
