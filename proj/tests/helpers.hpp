#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bct/mesh.hpp"

namespace testutil {

// Small deterministic generator so expectations are frozen across platforms.
struct Lcg {
  std::uint64_t s;
  explicit Lcg(std::uint64_t seed) : s(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  std::uint64_t next() {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    return s >> 11;
  }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (double)(next() & ((1ull << 53) - 1)) / (double)(1ull << 53);
  }
};

inline bct::TriMesh unit_right_triangle() {
  bct::TriMesh m;
  m.nodes.resize(3, 2);
  m.nodes << 0, 0, 1, 0, 0, 1;
  m.tris.resize(1, 3);
  m.tris << 0, 1, 2;
  m.boundary = {0, 1, 2};
  return m;
}

// Fresh scratch directory under the test working directory.
inline std::string scratch_dir(const std::string& name) {
  std::string d = "scratch_" + name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace testutil
