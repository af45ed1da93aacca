#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

namespace bct {

using DensityField = Eigen::VectorXd;  // one value per triangle

struct TriMesh {
  Eigen::Matrix<double, Eigen::Dynamic, 2> nodes;  // n x 2
  Eigen::Matrix<int, Eigen::Dynamic, 3> tris;      // K x 3, CCW
  std::vector<int> boundary;                       // ordered ring of boundary node indices

  int n_nodes() const { return static_cast<int>(nodes.rows()); }
  int n_tris() const { return static_cast<int>(tris.rows()); }
  int n_boundary() const { return static_cast<int>(boundary.size()); }
};

struct TriGeometry {
  double area;                       // signed; > 0 for CCW
  Eigen::Matrix<double, 3, 2> grads; // constant P1 basis gradients; rows sum to 0
};

// Concentric-ring disk mesh; outermost ring has exactly n_boundary nodes.
TriMesh generate_disk_mesh(int n_rings, int n_boundary);

TriGeometry triangle_geometry(const TriMesh& mesh, int k);

Eigen::VectorXd triangle_areas(const TriMesh& mesh);
Eigen::Matrix<double, Eigen::Dynamic, 2> triangle_centroids(const TriMesh& mesh);

// Throws std::runtime_error naming the violated invariant. The unit-circle check
// applies to generated meshes; hand-built meshes may opt out.
void validate_mesh(const TriMesh& mesh, bool require_unit_circle = false);

// Text format: "bcmesh 1" / "nodes N" / x y lines / "triangles K" / i j k lines /
// "boundary B" / ring indices. Written with >= 15 significant digits.
void save_mesh(const TriMesh& mesh, const std::string& path);
// Parse errors name the offending line. Clockwise triangles are reoriented;
// *reoriented (if given) receives how many were flipped.
TriMesh load_mesh(const std::string& path, int* reoriented = nullptr);

// "bcdensity 1" / K lines of rho_k.
void save_density(const DensityField& rho, const std::string& path);
DensityField load_density(const std::string& path);

// Interior edges as pairs of adjacent triangle indices (each edge shared by two).
std::vector<std::array<int, 2>> adjacent_triangle_pairs(const TriMesh& mesh);

// Max over nodes of the graph distance to the boundary node set; edge weight =
// length * sqrt(mean rho of adjacent triangles). Multi-source Dijkstra.
double estimate_optical_radius(const TriMesh& mesh, const DensityField& rho);

}  // namespace bct
