#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bct/mesh.hpp"

namespace bct {

// Ground-truth density generators, evaluated at triangle centroids.  All are
// deterministic for fixed parameters; `jitter > 0` adds a seeded relative
// perturbation.
struct SampleSpec {
  std::string generator = "constant";  // constant | inclusions | annulus | waveguide | folds
  std::string file;                    // when nonempty: load this density file instead

  double constant_value = 1.0;

  double background = 1.0;
  double value = 2.0;  // feature density

  struct Disc {
    double cx, cy, r, value;
  };
  std::vector<Disc> discs;  // inclusions; defaults applied when empty

  double inner_radius = 0.35, outer_radius = 0.6;  // annulus
  double half_width = 0.2;                         // waveguide
  int n_layers = 3;                                // folds
  double fold_amplitude = 0.25;

  double jitter = 0.0;
  std::uint64_t seed = 0;
};

DensityField generate_sample(const TriMesh& mesh, const SampleSpec& spec);

}  // namespace bct
