#include "bct/control.hpp"

#include <Eigen/SVD>
#include <stdexcept>

namespace bct {

namespace {

Eigen::VectorXd ring_values(const Eigen::VectorXd& full, const TriMesh& mesh) {
  Eigen::VectorXd r(mesh.n_boundary());
  for (int i = 0; i < mesh.n_boundary(); ++i) r[i] = full[mesh.boundary[i]];
  return r;
}

struct Scales {
  double s1, s2;
};

Scales block_scales(const FormData& fd) {
  double s1 = 0, s2 = 0;
  for (long i = 0; i < fd.P.rows(); ++i) s1 = std::max(s1, fd.P.row(i).norm());
  for (long i = 0; i < fd.B.cols(); ++i) s2 = std::max(s2, fd.B.col(i).norm());
  if (s1 == 0 || s2 == 0) throw std::runtime_error("assemble_control_system: zero data block");
  return {s1, s2};
}

Eigen::MatrixXd stacked_matrix(const FormData& fd, double w2, const Scales& sc) {
  int N = fd.N(), nb = fd.n_b;
  Eigen::MatrixXd A(N + nb, N);
  A.topRows(N) = fd.P / sc.s1;
  A.bottomRows(nb) = (w2 / sc.s2) * fd.B.transpose();
  return A;
}

Eigen::VectorXd stacked_rhs(const FormData& fd, const HarmonicBasis& hb, const TriMesh& mesh,
                            int alpha, double w2, const Scales& sc) {
  int N = fd.N(), nb = fd.n_b;
  Eigen::VectorXd Lring = ring_values(hb.L.col(alpha), mesh);
  Eigen::VectorXd phiring = ring_values(hb.phi.col(alpha), mesh);
  Eigen::VectorXd b(N + nb);
  b.head(N) = (fd.B * Lring) / sc.s1;
  b.tail(nb) = (w2 / sc.s2) * phiring;
  return b;
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::VectorXd> assemble_control_system(
    const FormData& fd, const HarmonicBasis& hb, const TriMesh& mesh, int alpha, double w2) {
  if (hb.phi.rows() != mesh.n_nodes() || fd.n_b != mesh.n_boundary() || alpha < 0 ||
      alpha >= hb.n_h)
    throw std::runtime_error("assemble_control_system: size mismatch");
  Scales sc = block_scales(fd);
  return {stacked_matrix(fd, w2, sc), stacked_rhs(fd, hb, mesh, alpha, w2, sc)};
}

Eigen::VectorXd solve_normal(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double cutoff,
                             int* rank_out) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& S = svd.singularValues();
  Eigen::VectorXd y = svd.matrixU().transpose() * b;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(S.size());
  int rank = 0;
  double smax = S.size() ? S[0] : 0.0;
  for (long k = 0; k < S.size(); ++k)
    if (S[k] > cutoff * smax) {
      z[k] = y[k] / S[k];
      ++rank;
    }
  if (rank_out) *rank_out = rank;
  return svd.matrixV() * z;
}

double control_residual(const Eigen::VectorXd& c, const FormData& fd, const HarmonicBasis& hb,
                        const TriMesh& mesh, int alpha) {
  Eigen::VectorXd phiring = ring_values(hb.phi.col(alpha), mesh);
  double den = phiring.norm();
  if (den == 0) throw std::runtime_error("control_residual: zero target on the boundary");
  return (fd.B.transpose() * c - phiring).norm() / den;
}

double phi_diagnostic(const Eigen::VectorXd& c, const FormData& fd, const HarmonicBasis& hb,
                      const TriMesh& mesh, int alpha) {
  Eigen::VectorXd Lring = ring_values(hb.L.col(alpha), mesh);
  return c.dot(fd.P * c) - 2.0 * c.dot(fd.B * Lring) + hb.phi.col(alpha).dot(hb.L.col(alpha));
}

std::vector<ControlSolution> solve_all_controls(const FormData& fd, const HarmonicBasis& hb,
                                                const TriMesh& mesh, double cutoff, double w2,
                                                double residual_ceiling) {
  Scales sc = block_scales(fd);
  Eigen::MatrixXd A = stacked_matrix(fd, w2, sc);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& S = svd.singularValues();
  double smax = S.size() ? S[0] : 0.0;
  int rank = 0;
  for (long k = 0; k < S.size(); ++k)
    if (S[k] > cutoff * smax) ++rank;

  std::vector<ControlSolution> out;
  for (int alpha = 0; alpha < hb.n_h; ++alpha) {
    Eigen::VectorXd b = stacked_rhs(fd, hb, mesh, alpha, w2, sc);
    Eigen::VectorXd y = svd.matrixU().transpose() * b;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(S.size());
    for (long k = 0; k < S.size(); ++k)
      if (S[k] > cutoff * smax) z[k] = y[k] / S[k];
    ControlSolution cs;
    cs.c = svd.matrixV() * z;
    cs.rank = rank;
    cs.cnorm = cs.c.norm();
    cs.residual = control_residual(cs.c, fd, hb, mesh, alpha);
    cs.phi = phi_diagnostic(cs.c, fd, hb, mesh, alpha);
    out.push_back(std::move(cs));
  }
  if (residual_ceiling > 0)
    for (int alpha = 0; alpha < hb.n_h; ++alpha)
      if (out[alpha].residual > residual_ceiling)
        throw std::runtime_error("control residual ceiling exceeded for target " +
                                 std::to_string(alpha) + ": " +
                                 std::to_string(out[alpha].residual) + " > " +
                                 std::to_string(residual_ceiling));
  return out;
}

}  // namespace bct
