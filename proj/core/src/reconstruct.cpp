#include "bct/reconstruct.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "bct/fem.hpp"

namespace bct {

double spectral_norm_sq(const Eigen::MatrixXd& X, int iters) {
  const long n = X.cols();
  if (n == 0 || X.rows() == 0) return 0.0;
  Eigen::VectorXd v(n);
  for (long k = 0; k < n; ++k) v[k] = std::cos(static_cast<double>(k));
  v /= v.norm();
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd w = X.transpose() * (X * v);
    lam = w.norm();
    if (lam == 0.0) return 0.0;
    v = w / lam;
  }
  return lam;
}

Eigen::MatrixXd adjacency_difference_operator(const TriMesh& mesh) {
  auto pairs = adjacent_triangle_pairs(mesh);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<long>(pairs.size()), mesh.n_tris());
  for (size_t r = 0; r < pairs.size(); ++r) {
    D(static_cast<long>(r), pairs[r][0]) = 1.0;
    D(static_cast<long>(r), pairs[r][1]) = -1.0;
  }
  return D;
}

ReconstructionSystem assemble_density_system(const TriMesh& mesh, const HarmonicBasis& hb,
                                             const FormData& fd,
                                             const std::vector<ControlSolution>& controls,
                                             double rho_min, double rho_max, double lambda_rel) {
  const int nh = hb.n_h;
  const int K = mesh.n_tris();
  if (static_cast<int>(controls.size()) != nh || hb.phi.rows() != mesh.n_nodes() ||
      fd.n_b != mesh.n_boundary())
    throw std::runtime_error("assemble_density_system: size mismatch");
  for (const auto& cs : controls)
    if (cs.c.size() != fd.N()) throw std::runtime_error("assemble_density_system: size mismatch");

  ReconstructionSystem sys;
  sys.rho_min = rho_min;
  sys.rho_max = rho_max;
  const long rows = static_cast<long>(nh) * (nh + 1) / 2;
  sys.A.resize(rows, K);
  sys.b.resize(rows);

  // Unit-density local mass block, scaled by each triangle's area below.
  Eigen::Matrix3d mloc;
  mloc << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  mloc /= 12.0;

  for (int k = 0; k < K; ++k) {
    const TriGeometry g = triangle_geometry(mesh, k);
    Eigen::Matrix3d mk = g.area * mloc;
    Eigen::MatrixXd ph(3, nh);  // harmonic values on this triangle's nodes
    for (int v = 0; v < 3; ++v) ph.row(v) = hb.phi.row(mesh.tris(k, v));
    long r = 0;
    for (int a = 0; a < nh; ++a)
      for (int b2 = a; b2 < nh; ++b2, ++r) sys.A(r, k) = ph.col(a).dot(mk * ph.col(b2));
  }

  Eigen::MatrixXd cc(fd.N(), nh);
  for (int a = 0; a < nh; ++a) cc.col(a) = controls[a].c;
  Eigen::MatrixXd gram = cc.transpose() * (fd.C * cc);
  long r = 0;
  for (int a = 0; a < nh; ++a)
    for (int b2 = a; b2 < nh; ++b2, ++r) sys.b[r] = gram(a, b2);

  sys.D = adjacency_difference_operator(mesh);
  if (lambda_rel > 0) {
    double nD = spectral_norm_sq(sys.D);
    sys.lambda = nD > 0 ? lambda_rel * spectral_norm_sq(sys.A) / nD : 0.0;
  }
  return sys;
}

namespace {

// Bounded-variable least squares on min |T x - c|^2, warm-started.  Classic
// active-set scheme: optimize over the free set, bind the first variable hit
// when the subproblem solution leaves the box, free the worst KKT violator.
// Returns the best feasible iterate seen; kkt_ok reports whether first-order
// optimality was reached before the iteration caps.
Eigen::VectorXd bvls(const Eigen::MatrixXd& T, const Eigen::VectorXd& c, double lo, double hi,
                     Eigen::VectorXd x, bool* kkt_ok) {
  const long K = T.cols();
  std::vector<int> state(K);  // 0 free, -1 at lower bound, +1 at upper bound
  for (long i = 0; i < K; ++i)
    state[i] = x[i] <= lo ? -1 : (x[i] >= hi ? +1 : 0);
  for (long i = 0; i < K; ++i) x[i] = std::min(hi, std::max(lo, x[i]));

  std::vector<bool> banned(K, false);
  auto obj = [&](const Eigen::VectorXd& y) { return (T * y - c).squaredNorm(); };
  double fbest = obj(x);
  Eigen::VectorXd xbest = x;
  if (kkt_ok) *kkt_ok = false;

  const int max_main = static_cast<int>(3 * K + 100);
  int qr_budget = 2000;
  long just_freed = -1;

  for (int main_it = 0; main_it < max_main; ++main_it) {
    // Optimize over the current free set, binding blockers one at a time.
    for (long inner = 0; inner <= K; ++inner) {
      std::vector<long> freeIdx;
      for (long i = 0; i < K; ++i)
        if (state[i] == 0) freeIdx.push_back(i);
      if (freeIdx.empty()) break;
      if (--qr_budget < 0) return xbest;

      Eigen::VectorXd xb = x;
      for (long i : freeIdx) xb[i] = 0.0;
      Eigen::VectorXd rhs = c - T * xb;
      Eigen::MatrixXd TF(T.rows(), static_cast<long>(freeIdx.size()));
      for (size_t j = 0; j < freeIdx.size(); ++j) TF.col(static_cast<long>(j)) = T.col(freeIdx[j]);
      Eigen::VectorXd z = TF.colPivHouseholderQr().solve(rhs);

      bool feasible = true;
      for (long j = 0; j < z.size(); ++j)
        if (z[j] < lo || z[j] > hi) {
          feasible = false;
          break;
        }
      if (feasible) {
        for (size_t j = 0; j < freeIdx.size(); ++j) x[freeIdx[j]] = z[static_cast<long>(j)];
        break;
      }
      double alpha = 1.0;
      long blocker = -1;
      int bbound = 0;
      for (size_t j = 0; j < freeIdx.size(); ++j) {
        double zj = z[static_cast<long>(j)], xj = x[freeIdx[j]];
        if (zj >= lo && zj <= hi) continue;
        double target = zj < lo ? lo : hi;
        double denom = zj - xj;
        double aj = denom == 0.0 ? 0.0 : (target - xj) / denom;
        if (aj < alpha) {
          alpha = aj;
          blocker = freeIdx[j];
          bbound = zj < lo ? -1 : +1;
        }
      }
      for (size_t j = 0; j < freeIdx.size(); ++j) {
        long i = freeIdx[j];
        x[i] = std::min(hi, std::max(lo, x[i] + alpha * (z[static_cast<long>(j)] - x[i])));
      }
      x[blocker] = bbound < 0 ? lo : hi;
      state[blocker] = bbound;
      if (alpha == 0.0 && blocker == just_freed) banned[blocker] = true;
    }

    double f = obj(x);
    if (f < fbest) {
      fbest = f;
      xbest = x;
      std::fill(banned.begin(), banned.end(), false);
    }

    // KKT: at a bound, only an inward-improving gradient component matters.
    Eigen::VectorXd w = T.transpose() * (c - T * x);
    double wmax = w.size() ? w.cwiseAbs().maxCoeff() : 0.0;
    double tol = 1e-12 * wmax;
    long pick = -1;
    double worst = tol;
    for (long i = 0; i < K; ++i) {
      if (banned[i]) continue;
      double viol = state[i] == -1 ? w[i] : (state[i] == +1 ? -w[i] : 0.0);
      if (viol > worst) {
        worst = viol;
        pick = i;
      }
    }
    if (pick < 0) {
      if (kkt_ok) *kkt_ok = true;
      break;
    }
    state[pick] = 0;
    just_freed = pick;
  }
  return xbest;
}

}  // namespace

ReconstructionResult solve_density(const ReconstructionSystem& sys, int max_iter,
                                   bool with_diagnostics) {
  if (!(sys.rho_min < sys.rho_max))
    throw std::runtime_error("solve_density: bounds must satisfy rho_min < rho_max");
  const long K = sys.A.cols();
  const double lo = sys.rho_min, hi = sys.rho_max;
  const double lam = sys.lambda;

  Eigen::MatrixXd AtA = sys.A.transpose() * sys.A;
  if (lam > 0) AtA += lam * (sys.D.transpose() * sys.D);
  Eigen::VectorXd Atb = sys.A.transpose() * sys.b;
  const double btb = sys.b.squaredNorm();
  auto obj = [&](const Eigen::VectorXd& y) { return y.dot(AtA * y) - 2.0 * Atb.dot(y) + btb; };
  auto clip = [&](Eigen::VectorXd y) {
    for (long i = 0; i < y.size(); ++i) y[i] = std::min(hi, std::max(lo, y[i]));
    return y;
  };

  // Stacked least-squares form of the same objective.
  const long mD = lam > 0 ? sys.D.rows() : 0;
  Eigen::MatrixXd S(sys.A.rows() + mD, K);
  S.topRows(sys.A.rows()) = sys.A;
  if (mD > 0) S.bottomRows(mD) = std::sqrt(lam) * sys.D;
  Eigen::VectorXd rfull = Eigen::VectorXd::Zero(S.rows());
  rfull.head(sys.b.size()) = sys.b;

  Eigen::VectorXd x = Eigen::VectorXd::Constant(K, (lo + hi) / 2.0);
  Eigen::VectorXd g = 2.0 * (AtA * x - Atb);
  double sn = spectral_norm_sq(S);
  double step = sn > 0 ? 1.0 / sn / 2.0 : 1.0;
  double fx = obj(x);
  Eigen::VectorXd xprev, gprev;
  bool have_prev = false;
  bool pg_converged = false;
  int it = 0;
  for (it = 0; it < max_iter; ++it) {
    if (have_prev) {
      Eigen::VectorXd s = x - xprev, y = g - gprev;
      double sy = s.dot(y);
      if (sy > 1e-300) step = s.squaredNorm() / sy;
    }
    Eigen::VectorXd xnew = clip(x - step * g);
    double fnew = obj(xnew);
    int bt = 0;
    while (fnew > fx && bt < 60) {
      step /= 2;
      xnew = clip(x - step * g);
      fnew = obj(xnew);
      ++bt;
    }
    if (fx - fnew <= 1e-12 * std::max(std::abs(fx), 1e-300)) {
      x = xnew;
      fx = fnew;
      pg_converged = true;
      break;
    }
    xprev = x;
    gprev = g;
    have_prev = true;
    x = xnew;
    fx = fnew;
    g = 2.0 * (AtA * x - Atb);
  }

  // Active-set refinement on the stacked system, in a QR-reduced space when
  // it is overdetermined; kept only if it lowers the true objective.
  bool kkt_ok = false;
  {
    Eigen::MatrixXd T;
    Eigen::VectorXd cvec;
    if (S.rows() >= K) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(S);
      T = qr.matrixR().topRows(K).triangularView<Eigen::Upper>();
      T = T * qr.colsPermutation().transpose();
      cvec = (qr.householderQ().transpose() * rfull).head(K);
    } else {
      T = S;
      cvec = rfull;
    }
    Eigen::VectorXd xp = bvls(T, cvec, lo, hi, x, &kkt_ok);
    double f0 = (S * x - rfull).squaredNorm();
    double f1 = (S * xp - rfull).squaredNorm();
    if (f1 < f0)
      x = xp;
    else
      kkt_ok = false;
  }

  ReconstructionResult res;
  res.estimate = x;
  res.iterations = it;
  res.converged = pg_converged || kkt_ok;
  res.objective = (S * x - rfull).squaredNorm();
  double bn = sys.b.norm();
  double rn = (sys.A * x - sys.b).norm();
  res.residual = bn > 0 ? rn / bn : rn;
  if (with_diagnostics) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(sys.A);
    const auto& sv = svd.singularValues();
    res.sigma_max = sv.size() ? sv[0] : 0.0;
    res.sigma_min = sv.size() ? sv[sv.size() - 1] : 0.0;
  }
  return res;
}

double relative_error(const DensityField& estimate, const DensityField& truth,
                      const TriMesh& mesh, bool area_weighted) {
  if (estimate.size() != mesh.n_tris() || truth.size() != mesh.n_tris())
    throw std::runtime_error("relative_error: field size does not match the mesh");
  if (!area_weighted) {
    double tn = truth.norm();
    if (tn == 0) throw std::runtime_error("relative_error: zero truth norm");
    return (estimate - truth).norm() / tn;
  }
  Eigen::VectorXd areas = triangle_areas(mesh);
  double num = areas.dot((estimate - truth).cwiseAbs2());
  double den = areas.dot(truth.cwiseAbs2());
  if (den == 0) throw std::runtime_error("relative_error: zero truth norm");
  return std::sqrt(num / den);
}

}  // namespace bct
