#include "bct/samples.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace bct {

DensityField generate_sample(const TriMesh& mesh, const SampleSpec& spec) {
  if (!spec.file.empty()) {
    DensityField rho = load_density(spec.file);
    if (rho.size() != mesh.n_tris())
      throw std::runtime_error("density file '" + spec.file + "' does not match the mesh (" +
                               std::to_string(rho.size()) + " values, " +
                               std::to_string(mesh.n_tris()) + " triangles)");
    return rho;
  }

  const Eigen::MatrixXd cent = triangle_centroids(mesh);
  const int K = mesh.n_tris();
  DensityField rho = DensityField::Constant(K, spec.background);

  if (spec.generator == "constant") {
    rho.setConstant(spec.constant_value);
  } else if (spec.generator == "inclusions") {
    std::vector<SampleSpec::Disc> discs = spec.discs;
    if (discs.empty())
      discs = {{0.45, 0.0, 0.25, spec.value}, {-0.45, 0.0, 0.25, spec.value}};
    for (int k = 0; k < K; ++k)
      for (const auto& d : discs) {
        double dx = cent(k, 0) - d.cx, dy = cent(k, 1) - d.cy;
        if (dx * dx + dy * dy < d.r * d.r) rho[k] = d.value;
      }
  } else if (spec.generator == "annulus") {
    for (int k = 0; k < K; ++k) {
      double r = std::hypot(cent(k, 0), cent(k, 1));
      if (r >= spec.inner_radius && r <= spec.outer_radius) rho[k] = spec.value;
    }
  } else if (spec.generator == "waveguide") {
    for (int k = 0; k < K; ++k)
      if (std::abs(cent(k, 1)) <= spec.half_width) rho[k] = spec.value;
  } else if (spec.generator == "folds") {
    // Alternating layers bent by a sinusoidal fold.
    if (spec.n_layers < 1) throw std::runtime_error("folds sample: n_layers must be positive");
    for (int k = 0; k < K; ++k) {
      double t = cent(k, 1) - spec.fold_amplitude * std::sin(M_PI * cent(k, 0));
      int layer = static_cast<int>(std::floor((t + 1.0) / (2.0 / spec.n_layers)));
      layer = std::min(spec.n_layers - 1, std::max(0, layer));
      if (layer % 2 == 1) rho[k] = spec.value;
    }
  } else {
    throw std::runtime_error("unknown sample generator '" + spec.generator + "'");
  }

  if (spec.jitter > 0) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < K; ++k) rho[k] *= 1.0 + spec.jitter * u(rng);
  }
  for (int k = 0; k < K; ++k)
    if (!(rho[k] > 0)) throw std::runtime_error("sample generator produced non-positive density");
  return rho;
}

}  // namespace bct
