#include "bct/forms.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "bct/fem.hpp"
#include "bct/io.hpp"

namespace bct {

Eigen::VectorXd time_primitive(const Eigen::VectorXd& f, double dt) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(f.size());
  for (long k = 1; k < f.size(); ++k) out[k] = out[k - 1] + dt / 2.0 * (f[k] + f[k - 1]);
  return out;
}

Eigen::MatrixXd time_primitive(const Eigen::MatrixXd& f, double dt) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(f.rows(), f.cols());
  for (long k = 1; k < f.cols(); ++k) out.col(k) = out.col(k - 1) + dt / 2.0 * (f.col(k) + f.col(k - 1));
  return out;
}

Eigen::VectorXd time_derivative(const Eigen::VectorXd& f, double dt) {
  long n = f.size();
  if (n < 3) throw std::runtime_error("time_derivative: need at least 3 samples");
  Eigen::VectorXd g(n);
  for (long k = 1; k + 1 < n; ++k) g[k] = (f[k + 1] - f[k - 1]) / (2.0 * dt);
  g[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dt);
  g[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dt);
  return g;
}

Eigen::MatrixXd time_derivative(const Eigen::MatrixXd& f, double dt) {
  long n = f.cols();
  if (n < 3) throw std::runtime_error("time_derivative: need at least 3 samples");
  Eigen::MatrixXd g(f.rows(), n);
  for (long k = 1; k + 1 < n; ++k) g.col(k) = (f.col(k + 1) - f.col(k - 1)) / (2.0 * dt);
  g.col(0) = (-3.0 * f.col(0) + 4.0 * f.col(1) - f.col(2)) / (2.0 * dt);
  g.col(n - 1) = (3.0 * f.col(n - 1) - 4.0 * f.col(n - 2) + f.col(n - 3)) / (2.0 * dt);
  return g;
}

namespace {

void check_symmetric_grid(const Eigen::MatrixXd& trace) {
  if ((trace.cols() - 1) % 2 != 0)
    throw std::runtime_error("plus/minus part: grid not symmetric about T (odd step count)");
}

}  // namespace

Eigen::MatrixXd plus_part(const Eigen::MatrixXd& trace) {
  check_symmetric_grid(trace);
  long n2T = trace.cols() - 1, nT = n2T / 2;
  Eigen::MatrixXd out(trace.rows(), nT + 1);
  for (long k = 0; k <= nT; ++k) out.col(k) = (trace.col(k) + trace.col(n2T - k)) / 2.0;
  return out;
}

Eigen::MatrixXd minus_part(const Eigen::MatrixXd& trace) {
  check_symmetric_grid(trace);
  long n2T = trace.cols() - 1, nT = n2T / 2;
  Eigen::MatrixXd out(trace.rows(), nT + 1);
  for (long k = 0; k <= nT; ++k) out.col(k) = (trace.col(k) - trace.col(n2T - k)) / 2.0;
  return out;
}

namespace {

// shifted sample: series[k - m], zero outside [0, n]
inline double samp(const Eigen::VectorXd& s, long idx) {
  return (idx >= 0 && idx < s.size()) ? s[idx] : 0.0;
}

struct EntryContext {
  const TriMesh& mesh;
  const ControlBasis& basis;
  const TraceSet& traces;
  long nT, n2T;
  double dt;
  Eigen::VectorXd amp, Iamp;  // base amplitude series on [0, 2T] and its primitive
  Eigen::MatrixXd ring_loads;  // n_b x n_b: row alpha = load vector w_alpha at ring nodes

  EntryContext(const TriMesh& m, const ControlBasis& b, const TraceSet& t)
      : mesh(m), basis(b), traces(t) {
    n2T = t.n_steps;
    nT = n2T / 2;
    dt = t.dt_solver;
    amp = base_amplitude_series(b, dt, (int)n2T);
    Iamp = time_primitive(amp, dt);
    ring_loads.resize(b.n_b, b.n_b);
    for (int alpha = 0; alpha < b.n_b; ++alpha) {
      Eigen::VectorXd q = Eigen::VectorXd::Zero(b.n_b);
      q[alpha] = b.qscale(alpha);
      Eigen::VectorXd w = boundary_load(m, q);
      for (int r = 0; r < b.n_b; ++r) ring_loads(alpha, r) = w[m.boundary[r]];
    }
  }

  // w_a . trace_b(t) on the base (unshifted) grid
  Eigen::VectorXd projected(int a, int b) const {
    return traces.base.at(b).transpose() * ring_loads.row(a).transpose();
  }
};

double trapz_weight(long k, long nT, double dt) { return (k == 0 || k == nT) ? dt / 2.0 : dt; }

}  // namespace

namespace {

// One-sided boundary quadratures of the three identities for the ordered pair
// (i, j). The discrete identity closes only to O(dt^2), so the one-sided value
// is asymmetric at that order; the public forms average the two orderings,
// which restores symmetry to roundoff without changing the value's order of
// accuracy.
double connecting_one_sided(const EntryContext& cx, int nt, int i, int j) {
  int a = i / nt, ja = i % nt;
  int b = j / nt, jb = j % nt;
  long ma = (long)ja * cx.traces.substeps, mb = (long)jb * cx.traces.substeps;
  Eigen::VectorXd Sab = cx.projected(a, b);                         // w_a . tr_b
  Eigen::VectorXd Iba = time_primitive(cx.projected(b, a), cx.dt);  // I(w_b . tr_a)
  double acc = 0;
  for (long k = 0; k <= cx.nT; ++k) {
    double wq = trapz_weight(k, cx.nT, cx.dt);
    double plus_g = (samp(Sab, k - mb) + samp(Sab, cx.n2T - k - mb)) / 2.0;
    double amp_plus_g = (samp(cx.amp, k - mb) + samp(cx.amp, cx.n2T - k - mb)) / 2.0;
    acc += wq * (samp(cx.Iamp, k - ma) * plus_g - amp_plus_g * samp(Iba, k - ma));
  }
  return acc;
}

double potential_one_sided(const EntryContext& cx, int nt, int i, int j) {
  int a = i / nt, ja = i % nt;
  int b = j / nt, jb = j % nt;
  long ma = (long)ja * cx.traces.substeps, mb = (long)jb * cx.traces.substeps;
  Eigen::VectorXd Dab = time_derivative(cx.projected(a, b), cx.dt);
  Eigen::VectorXd Dba = time_derivative(cx.projected(b, a), cx.dt);
  double acc = 0;
  for (long k = 0; k <= cx.nT; ++k) {
    double wq = trapz_weight(k, cx.nT, cx.dt);
    double dplus_g = (samp(Dab, k - mb) - samp(Dab, cx.n2T - k - mb)) / 2.0;
    double amp_plus_g = (samp(cx.amp, k - mb) + samp(cx.amp, cx.n2T - k - mb)) / 2.0;
    acc += wq * (samp(cx.amp, k - ma) * dplus_g + amp_plus_g * samp(Dba, k - ma));
  }
  return acc;
}

double kinetic_one_sided(const EntryContext& cx, int nt, int i, int j) {
  int a = i / nt, ja = i % nt;
  int b = j / nt, jb = j % nt;
  long ma = (long)ja * cx.traces.substeps, mb = (long)jb * cx.traces.substeps;
  Eigen::VectorXd Dab = time_derivative(cx.projected(a, b), cx.dt);
  Eigen::VectorXd Dba = time_derivative(cx.projected(b, a), cx.dt);
  double acc = 0;
  for (long k = 0; k <= cx.nT; ++k) {
    double wq = trapz_weight(k, cx.nT, cx.dt);
    double dminus_g = (samp(Dab, k - mb) + samp(Dab, cx.n2T - k - mb)) / 2.0;
    double amp_minus_g = (samp(cx.amp, k - mb) - samp(cx.amp, cx.n2T - k - mb)) / 2.0;
    acc += wq * (samp(cx.amp, k - ma) * dminus_g + amp_minus_g * samp(Dba, k - ma));
  }
  return acc;
}

}  // namespace

double connecting_form(const TriMesh& mesh, const ControlBasis& basis, const TraceSet& traces,
                       int i, int j) {
  EntryContext cx(mesh, basis, traces);
  return (connecting_one_sided(cx, basis.n_t, i, j) + connecting_one_sided(cx, basis.n_t, j, i)) /
         2.0;
}

double potential_form(const TriMesh& mesh, const ControlBasis& basis, const TraceSet& traces,
                      int i, int j) {
  EntryContext cx(mesh, basis, traces);
  return (potential_one_sided(cx, basis.n_t, i, j) + potential_one_sided(cx, basis.n_t, j, i)) /
         2.0;
}

double kinetic_form(const TriMesh& mesh, const ControlBasis& basis, const TraceSet& traces,
                    int i, int j) {
  EntryContext cx(mesh, basis, traces);
  return (kinetic_one_sided(cx, basis.n_t, i, j) + kinetic_one_sided(cx, basis.n_t, j, i)) / 2.0;
}

namespace {

// Weight vector V over the full [0, 2T] grid such that
//   sum_{k=0}^{nT} q[k] * (base[k - m] + sign_rev * base[n2T - k - m])
// = sum_{kappa} V[kappa] * base[kappa].
Eigen::VectorXd corr_weight(const Eigen::VectorXd& q, long m, int sign_rev, long nT, long n2T) {
  Eigen::VectorXd V = Eigen::VectorXd::Zero(n2T + 1);
  for (long k = 0; k <= nT; ++k) {
    long idx = k - m;
    if (idx >= 0 && idx <= n2T) V[idx] += q[k];
    if (sign_rev != 0) {
      long idx2 = n2T - k - m;
      if (idx2 >= 0 && idx2 <= n2T) V[idx2] += sign_rev * q[k];
    }
  }
  return V;
}

double rel_asym(const Eigen::MatrixXd& Q) {
  double n = Q.norm();
  return n == 0 ? 0.0 : (Q - Q.transpose()).norm() / n;
}

}  // namespace

FormData build_form_data(const TriMesh& mesh, const ControlBasis& basis, const TraceSet& traces) {
  if ((int)traces.base.size() != basis.n_b)
    throw std::runtime_error("build_form_data: missing traces (have " +
                             std::to_string(traces.base.size()) + ", basis needs " +
                             std::to_string(basis.n_b) + ")");
  for (int b = 0; b < basis.n_b; ++b)
    if (traces.base[b].size() == 0)
      throw std::runtime_error("build_form_data: missing trace for control " +
                               std::to_string(basis.flat_index(b, 0)));
  const int nb = basis.n_b, nt = basis.n_t;
  const long n2T = traces.n_steps, nT = n2T / 2;
  const long ss = traces.substeps;
  const double dt = traces.dt_solver;
  const int N = nb * nt;

  EntryContext cx(mesh, basis, traces);

  // trapezoid weights on [0, T]
  Eigen::VectorXd wq(nT + 1);
  for (long k = 0; k <= nT; ++k) wq[k] = trapz_weight(k, nT, dt);

  // per-shift amplitude series on [0, T]
  Eigen::MatrixXd amp_s(nt, nT + 1), ampI_s(nt, nT + 1), amp_plus(nt, nT + 1);
  for (int j = 0; j < nt; ++j) {
    long m = (long)j * ss;
    for (long k = 0; k <= nT; ++k) {
      amp_s(j, k) = samp(cx.amp, k - m);
      ampI_s(j, k) = samp(cx.Iamp, k - m);
      amp_plus(j, k) = (samp(cx.amp, k - m) + samp(cx.amp, n2T - k - m)) / 2.0;
    }
  }

  // weight matrices, one row per (ja, jb) pair, columns over the full [0, 2T] grid
  const int np = nt * nt;
  Eigen::MatrixXd W1(np, n2T + 1), W2(np, n2T + 1), W3(np, n2T + 1), W4(np, n2T + 1),
      W5(np, n2T + 1);
  for (int ja = 0; ja < nt; ++ja)
    for (int jb = 0; jb < nt; ++jb) {
      int r = ja * nt + jb;
      long mb = (long)jb * ss;
      W1.row(r) = corr_weight((wq.array() * ampI_s.row(ja).transpose().array() / 2.0).matrix(), mb,
                              +1, nT, n2T);
      W3.row(r) = corr_weight((wq.array() * amp_s.row(ja).transpose().array() / 2.0).matrix(), mb,
                              -1, nT, n2T);
      W4.row(r) = corr_weight((wq.array() * amp_s.row(ja).transpose().array() / 2.0).matrix(), mb,
                              +1, nT, n2T);
      // W2/W5 row (u, v) holds the u-th plus/minus amplitude against shift m_v;
      // consumers index them at (jb, ja)
      W2.row(r) = corr_weight((wq.array() * amp_plus.row(ja).transpose().array()).matrix(), mb, 0,
                              nT, n2T);
      Eigen::VectorXd amp_minus_ja =
          amp_s.row(ja).transpose() - amp_plus.row(ja).transpose();
      W5.row(r) = corr_weight((wq.array() * amp_minus_ja.array()).matrix(), mb, 0, nT, n2T);
    }

  Eigen::MatrixXd Qc = Eigen::MatrixXd::Zero(N, N), Qp = Eigen::MatrixXd::Zero(N, N),
                  Qk = Eigen::MatrixXd::Zero(N, N);

  // one pass per simulated base trace tau
  for (int tau = 0; tau < nb; ++tau) {
    // SS(a, k) = w_a . tr_tau(:, k); II, DD its primitive and derivative
    Eigen::MatrixXd SS = cx.ring_loads * traces.base[tau];
    Eigen::MatrixXd II = time_primitive(SS, dt);
    Eigen::MatrixXd DD = time_derivative(SS, dt);

    Eigen::MatrixXd T1 = SS * W1.transpose();  // nb x np, [a, (ja,jb)] -> C[(a,ja),(tau,jb)]
    Eigen::MatrixXd T2 = II * W2.transpose();  // [b, (jb,ja)] -> C[(tau,ja),(b,jb)] (minus)
    Eigen::MatrixXd T3 = DD * W3.transpose();  // [a, (ja,jb)] -> P[(a,ja),(tau,jb)]
    Eigen::MatrixXd T5 = DD * W2.transpose();  // [b, (jb,ja)] -> P[(tau,ja),(b,jb)]
    Eigen::MatrixXd T4 = DD * W4.transpose();  // [a, (ja,jb)] -> KIN[(a,ja),(tau,jb)]
    Eigen::MatrixXd T6 = DD * W5.transpose();  // [b, (jb,ja)] -> KIN[(tau,ja),(b,jb)]

    // Each one-sided contribution is split evenly between its slot and the
    // transposed slot: every entry then carries the average of the two
    // orderings of the identity, so the assembled matrices are symmetric to
    // accumulation roundoff (the asym_* metrics) before the exact
    // symmetrization below.
    for (int ja = 0; ja < nt; ++ja)
      for (int jb = 0; jb < nt; ++jb) {
        int r_ab = ja * nt + jb;  // weight row for (ja, jb)
        int r_ba = jb * nt + ja;  // weight row for (jb, ja)
        for (int x = 0; x < nb; ++x) {
          Qc(x * nt + ja, tau * nt + jb) += T1(x, r_ab) / 2.0;
          Qc(tau * nt + jb, x * nt + ja) += T1(x, r_ab) / 2.0;
          Qc(tau * nt + ja, x * nt + jb) -= T2(x, r_ba) / 2.0;
          Qc(x * nt + jb, tau * nt + ja) -= T2(x, r_ba) / 2.0;
          Qp(x * nt + ja, tau * nt + jb) += T3(x, r_ab) / 2.0;
          Qp(tau * nt + jb, x * nt + ja) += T3(x, r_ab) / 2.0;
          Qp(tau * nt + ja, x * nt + jb) += T5(x, r_ba) / 2.0;
          Qp(x * nt + jb, tau * nt + ja) += T5(x, r_ba) / 2.0;
          Qk(x * nt + ja, tau * nt + jb) += T4(x, r_ab) / 2.0;
          Qk(tau * nt + jb, x * nt + ja) += T4(x, r_ab) / 2.0;
          Qk(tau * nt + ja, x * nt + jb) += T6(x, r_ba) / 2.0;
          Qk(x * nt + jb, tau * nt + ja) += T6(x, r_ba) / 2.0;
        }
      }
  }

  FormData fd;
  fd.n_b = nb;
  fd.n_t = nt;
  fd.T = basis.T();
  fd.dt_solver = dt;
  fd.asym_C = rel_asym(Qc);
  fd.asym_P = rel_asym(Qp);
  fd.asym_KIN = rel_asym(Qk);
  fd.C = (Qc + Qc.transpose()) / 2.0;
  fd.P = (Qp + Qp.transpose()) / 2.0;
  fd.KIN = (Qk + Qk.transpose()) / 2.0;

  fd.B.resize(N, nb);
  for (int b = 0; b < nb; ++b)
    for (int j = 0; j < nt; ++j) fd.B.row(b * nt + j) = traces.base[b].col(nT - (long)j * ss);
  return fd;
}

void save_form_data(const FormData& fd, const std::string& path, const std::string& header_meta) {
  std::string out;
  size_t n = (size_t)fd.N();
  out.reserve(50 * (2 * n * n + n * fd.n_b) + 1024);
  out += "bcformdata 1\n";
  if (!header_meta.empty()) {
    std::istringstream ms(header_meta);
    std::string line;
    while (std::getline(ms, line)) out += "# " + line + "\n";
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g\n", fd.n_b, fd.n_t, fd.T, fd.dt_solver);
  out += buf;
  auto coo = [&](const char* tag, const Eigen::MatrixXd& m) {
    out += std::string(tag) + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (long i = 0; i < m.rows(); ++i)
      for (long j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", i, j, m(i, j));
        out += buf;
      }
  };
  coo("C", fd.C);
  coo("P", fd.P);
  out += "B " + std::to_string(fd.B.rows()) + " " + std::to_string(fd.B.cols()) + "\n";
  for (long i = 0; i < fd.B.rows(); ++i) {
    for (long j = 0; j < fd.B.cols(); ++j) {
      std::snprintf(buf, sizeof buf, j + 1 < fd.B.cols() ? "%.17g " : "%.17g\n", fd.B(i, j));
      out += buf;
    }
  }
  io::write_file(path, out);
}

FormData load_form_data(const std::string& path, std::string* header_meta) {
  std::string text = io::read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 12) != "bcformdata 1")
    throw std::runtime_error(path + ":1: parse error: expected header 'bcformdata 1'");
  std::string meta;
  std::streampos pos = in.tellg();
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    meta += line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1) + "\n";
    pos = in.tellg();
  }
  in.seekg(pos);
  FormData fd;
  if (!(in >> fd.n_b >> fd.n_t >> fd.T >> fd.dt_solver))
    throw std::runtime_error(path + ": parse error: expected 'n_b n_t T dt_solver'");
  auto read_block = [&](const char* tag) {
    std::string got;
    long r, c;
    if (!(in >> got >> r >> c) || got != tag)
      throw std::runtime_error(path + ": parse error: expected '" + tag + " rows cols'");
    Eigen::MatrixXd m(r, c);
    if (std::string(tag) == "B") {
      for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j)
          if (!(in >> m(i, j))) throw std::runtime_error(path + ": parse error in B block");
    } else {
      for (long n = 0; n < r * c; ++n) {
        long i, j;
        double v;
        if (!(in >> i >> j >> v))
          throw std::runtime_error(path + ": parse error in " + tag + " block");
        m(i, j) = v;
      }
    }
    return m;
  };
  fd.C = read_block("C");
  fd.P = read_block("P");
  fd.B = read_block("B");
  if (fd.C.rows() != fd.N() || fd.P.rows() != fd.N() || fd.B.rows() != fd.N() ||
      fd.B.cols() != fd.n_b)
    throw std::runtime_error(path + ": validation error: block sizes inconsistent with n_b, n_t");
  if (header_meta) *header_meta = meta;
  return fd;
}

}  // namespace bct
