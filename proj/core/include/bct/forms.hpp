#pragma once

#include <Eigen/Dense>
#include <string>

#include "bct/mesh.hpp"
#include "bct/wavesim.hpp"

namespace bct {

// Inverse-problem data: everything downstream of this struct is computable from
// boundary measurements and the known controls alone.
struct FormData {
  int n_b = 0, n_t = 0;
  double T = 0, dt_solver = 0;
  Eigen::MatrixXd C;    // N x N connecting form
  Eigen::MatrixXd P;    // N x N potential form
  Eigen::MatrixXd KIN;  // N x N kinetic form (diagnostic; not persisted)
  Eigen::MatrixXd B;    // N x n_b terminal boundary values, row i = U^{f_i}(T) on the ring
  // relative asymmetry of the assembled matrices before the final exact
  // symmetrization; the assembly averages the two orderings of each identity,
  // so this measures accumulation roundoff (quality metric)
  double asym_C = 0, asym_P = 0, asym_KIN = 0;
  int N() const { return n_b * n_t; }
};

// Cumulative trapezoid along columns (time axis); result(0) = 0.
Eigen::VectorXd time_primitive(const Eigen::VectorXd& f, double dt);
Eigen::MatrixXd time_primitive(const Eigen::MatrixXd& f, double dt);

// Centered differences in time, second-order one-sided at both ends.
Eigen::VectorXd time_derivative(const Eigen::VectorXd& f, double dt);
Eigen::MatrixXd time_derivative(const Eigen::MatrixXd& f, double dt);

// u_{+/-}(t) = (u(t) +/- u(2T-t))/2 restricted to [0, T]; the grid must have an even
// step count (symmetric about T).
Eigen::MatrixXd plus_part(const Eigen::MatrixXd& trace);
Eigen::MatrixXd minus_part(const Eigen::MatrixXd& trace);

// Per-entry forms for controls i, j (flat indices), averaged over the two
// orderings of the identity (exactly symmetric in i, j). Reference
// implementations used to validate the blocked assembly and in small tests.
double connecting_form(const TriMesh& mesh, const ControlBasis& basis, const TraceSet& traces,
                       int i, int j);
double potential_form(const TriMesh& mesh, const ControlBasis& basis, const TraceSet& traces,
                      int i, int j);
double kinetic_form(const TriMesh& mesh, const ControlBasis& basis, const TraceSet& traces,
                    int i, int j);

// Full C, P, KIN, B assembly (blocked, O(N_b^2 N_t^2) weight correlations).
FormData build_form_data(const TriMesh& mesh, const ControlBasis& basis, const TraceSet& traces);

// Single text file: header (n_b, n_t, T, dt_solver), C and P in coordinate format,
// B as rows. header_meta lines (e.g. input hashes) are embedded as '#' comments.
void save_form_data(const FormData& fd, const std::string& path,
                    const std::string& header_meta = "");
FormData load_form_data(const std::string& path, std::string* header_meta = nullptr);

}  // namespace bct
