#include "bct/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "bct/io.hpp"

namespace bct {

TriMesh generate_disk_mesh(int n_rings, int n_boundary) {
  if (n_rings < 1) throw std::runtime_error("generate_disk_mesh: n_rings must be >= 1");
  if (n_boundary < 8) throw std::runtime_error("generate_disk_mesh: n_boundary must be >= 8");

  std::vector<std::array<double, 2>> nodes{{0.0, 0.0}};
  std::vector<std::vector<int>> rings(1, std::vector<int>{0});
  std::vector<int> counts(n_rings);
  for (int r = 1; r <= n_rings; ++r)
    counts[r - 1] = std::max(3, (int)std::lround((double)n_boundary * r / n_rings));
  counts[n_rings - 1] = n_boundary;

  for (int r = 1; r <= n_rings; ++r) {
    double rad = (double)r / n_rings;
    std::vector<int> ring;
    int cnt = counts[r - 1];
    for (int k = 0; k < cnt; ++k) {
      double th = 2.0 * M_PI * k / cnt;
      ring.push_back((int)nodes.size());
      nodes.push_back({rad * std::cos(th), rad * std::sin(th)});
    }
    rings.push_back(std::move(ring));
  }

  std::vector<std::array<int, 3>> tris;
  const auto& ring1 = rings[1];
  int n1 = (int)ring1.size();
  for (int k = 0; k < n1; ++k)
    tris.push_back({0, ring1[k], ring1[(k + 1) % n1]});
  // angle-zipper between consecutive rings
  for (int r = 1; r < n_rings; ++r) {
    const auto& inner = rings[r];
    const auto& outer = rings[r + 1];
    int ni = (int)inner.size(), no = (int)outer.size();
    int i = 0, j = 0;
    while (i < ni || j < no) {
      double ai = 2.0 * M_PI * (i + 1) / ni;
      double bj = 2.0 * M_PI * (j + 1) / no;
      if (j < no && (i >= ni || bj <= ai)) {
        tris.push_back({outer[j % no], outer[(j + 1) % no], inner[i % ni]});
        ++j;
      } else {
        tris.push_back({inner[i % ni], outer[j % no], inner[(i + 1) % ni]});
        ++i;
      }
    }
  }

  TriMesh m;
  m.nodes.resize((int)nodes.size(), 2);
  for (int i = 0; i < (int)nodes.size(); ++i) {
    m.nodes(i, 0) = nodes[i][0];
    m.nodes(i, 1) = nodes[i][1];
  }
  m.tris.resize((int)tris.size(), 3);
  for (int k = 0; k < (int)tris.size(); ++k)
    for (int a = 0; a < 3; ++a) m.tris(k, a) = tris[k][a];
  m.boundary = rings[n_rings];
  validate_mesh(m, /*require_unit_circle=*/true);
  return m;
}

TriGeometry triangle_geometry(const TriMesh& mesh, int k) {
  if (k < 0 || k >= mesh.n_tris()) throw std::runtime_error("triangle_geometry: index out of range");
  Eigen::Vector2d p0 = mesh.nodes.row(mesh.tris(k, 0));
  Eigen::Vector2d p1 = mesh.nodes.row(mesh.tris(k, 1));
  Eigen::Vector2d p2 = mesh.nodes.row(mesh.tris(k, 2));
  Eigen::Vector2d d1 = p1 - p0, d2 = p2 - p0;
  TriGeometry g;
  g.area = 0.5 * (d1.x() * d2.y() - d1.y() * d2.x());
  double b0 = p1.y() - p2.y(), b1 = p2.y() - p0.y(), b2 = p0.y() - p1.y();
  double c0 = p2.x() - p1.x(), c1 = p0.x() - p2.x(), c2 = p1.x() - p0.x();
  g.grads << b0, c0, b1, c1, b2, c2;
  g.grads /= (2.0 * g.area);
  return g;
}

Eigen::VectorXd triangle_areas(const TriMesh& mesh) {
  Eigen::VectorXd areas(mesh.n_tris());
  for (int k = 0; k < mesh.n_tris(); ++k) areas[k] = triangle_geometry(mesh, k).area;
  return areas;
}

Eigen::Matrix<double, Eigen::Dynamic, 2> triangle_centroids(const TriMesh& mesh) {
  Eigen::Matrix<double, Eigen::Dynamic, 2> c(mesh.n_tris(), 2);
  for (int k = 0; k < mesh.n_tris(); ++k) {
    c.row(k) = (mesh.nodes.row(mesh.tris(k, 0)) + mesh.nodes.row(mesh.tris(k, 1)) +
                mesh.nodes.row(mesh.tris(k, 2))) /
               3.0;
  }
  return c;
}

namespace {

std::map<std::pair<int, int>, int> edge_triangle_counts(const TriMesh& mesh) {
  std::map<std::pair<int, int>, int> cnt;
  for (int k = 0; k < mesh.n_tris(); ++k) {
    for (int a = 0; a < 3; ++a) {
      int i = mesh.tris(k, a), j = mesh.tris(k, (a + 1) % 3);
      cnt[{std::min(i, j), std::max(i, j)}]++;
    }
  }
  return cnt;
}

}  // namespace

void validate_mesh(const TriMesh& mesh, bool require_unit_circle) {
  int n = mesh.n_nodes();
  if (n < 3) throw std::runtime_error("mesh invariant violated: fewer than 3 nodes");
  for (int k = 0; k < mesh.n_tris(); ++k)
    for (int a = 0; a < 3; ++a) {
      int idx = mesh.tris(k, a);
      if (idx < 0 || idx >= n)
        throw std::runtime_error("mesh invariant violated: triangle " + std::to_string(k) +
                                 " references node index " + std::to_string(idx) +
                                 " outside [0, " + std::to_string(n) + ")");
    }
  for (int k = 0; k < mesh.n_tris(); ++k) {
    if (triangle_geometry(mesh, k).area <= 0.0)
      throw std::runtime_error("mesh invariant violated: triangle " + std::to_string(k) +
                               " has non-positive signed area (clockwise or degenerate)");
  }
  if (mesh.boundary.size() < 3)
    throw std::runtime_error("mesh invariant violated: boundary ring has fewer than 3 nodes");
  for (int b : mesh.boundary)
    if (b < 0 || b >= n)
      throw std::runtime_error("mesh invariant violated: boundary index out of range");
  if (require_unit_circle) {
    for (int b : mesh.boundary) {
      double r = mesh.nodes.row(b).norm();
      if (std::abs(r - 1.0) > 1e-9)
        throw std::runtime_error("mesh invariant violated: boundary node " + std::to_string(b) +
                                 " not on the unit circle");
    }
  }
  // edges shared by exactly one triangle must be precisely the ring edges
  auto cnt = edge_triangle_counts(mesh);
  std::map<std::pair<int, int>, int> ring_edges;
  int nb = mesh.n_boundary();
  for (int a = 0; a < nb; ++a) {
    int i = mesh.boundary[a], j = mesh.boundary[(a + 1) % nb];
    ring_edges[{std::min(i, j), std::max(i, j)}]++;
  }
  for (auto& [e, c] : cnt) {
    if (c > 2)
      throw std::runtime_error("mesh invariant violated: edge shared by more than two triangles");
    if (c == 1 && !ring_edges.count(e))
      throw std::runtime_error("mesh invariant violated: single-triangle edge not on boundary ring");
  }
  for (auto& [e, c] : ring_edges) {
    if (c != 1) throw std::runtime_error("mesh invariant violated: boundary ring is not a simple cycle");
    auto it = cnt.find(e);
    if (it == cnt.end() || it->second != 1)
      throw std::runtime_error("mesh invariant violated: boundary ring edge not a single-triangle edge");
  }
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_mesh(const TriMesh& mesh, const std::string& path) {
  std::string out;
  out += "bcmesh 1\n";
  out += "nodes " + std::to_string(mesh.n_nodes()) + "\n";
  for (int i = 0; i < mesh.n_nodes(); ++i)
    out += fmt17(mesh.nodes(i, 0)) + " " + fmt17(mesh.nodes(i, 1)) + "\n";
  out += "triangles " + std::to_string(mesh.n_tris()) + "\n";
  for (int k = 0; k < mesh.n_tris(); ++k)
    out += std::to_string(mesh.tris(k, 0)) + " " + std::to_string(mesh.tris(k, 1)) + " " +
           std::to_string(mesh.tris(k, 2)) + "\n";
  out += "boundary " + std::to_string(mesh.n_boundary()) + "\n";
  for (int b : mesh.boundary) out += std::to_string(b) + "\n";
  io::write_file(path, out);
}

namespace {

struct MeshParser {
  std::vector<std::string> lines;
  std::string path;
  size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg, size_t ln) {
    throw std::runtime_error(path + ":" + std::to_string(ln + 1) + ": parse error: " + msg);
  }
  std::string next(const std::string& what) {
    while (pos < lines.size()) {
      const std::string& l = lines[pos];
      if (l.find_first_not_of(" \t\r") == std::string::npos || l[0] == '#') {
        ++pos;
        continue;
      }
      return lines[pos++];
    }
    fail("unexpected end of file, expected " + what, lines.size() ? lines.size() - 1 : 0);
  }
};

}  // namespace

TriMesh load_mesh(const std::string& path, int* reoriented) {
  std::string text = io::read_file(path);
  MeshParser p;
  p.path = path;
  {
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) p.lines.push_back(line);
  }
  auto expect_header = [&](const std::string& line, const std::string& tag, size_t ln) -> long {
    std::istringstream ss(line);
    std::string got;
    long count = -1;
    ss >> got >> count;
    if (got != tag || count < 0) p.fail("expected '" + tag + " <count>', got '" + line + "'", ln);
    return count;
  };

  std::string magic = p.next("header 'bcmesh 1'");
  if (magic.substr(0, 8) != "bcmesh 1") p.fail("expected header 'bcmesh 1'", p.pos - 1);

  long nn = expect_header(p.next("'nodes N'"), "nodes", p.pos - 1);
  TriMesh m;
  m.nodes.resize(nn, 2);
  for (long i = 0; i < nn; ++i) {
    std::string line = p.next("node coordinates");
    std::istringstream ss(line);
    double x, y;
    if (!(ss >> x >> y)) p.fail("expected 'x y' node coordinates", p.pos - 1);
    m.nodes(i, 0) = x;
    m.nodes(i, 1) = y;
  }
  long nt = expect_header(p.next("'triangles K'"), "triangles", p.pos - 1);
  m.tris.resize(nt, 3);
  for (long k = 0; k < nt; ++k) {
    std::string line = p.next("triangle indices");
    std::istringstream ss(line);
    long a, b, c;
    if (!(ss >> a >> b >> c)) p.fail("expected 'i j k' triangle indices", p.pos - 1);
    m.tris(k, 0) = (int)a;
    m.tris(k, 1) = (int)b;
    m.tris(k, 2) = (int)c;
  }
  long nb = expect_header(p.next("'boundary B'"), "boundary", p.pos - 1);
  for (long i = 0; i < nb; ++i) {
    std::string line = p.next("boundary index");
    std::istringstream ss(line);
    long b;
    if (!(ss >> b)) p.fail("expected boundary node index", p.pos - 1);
    m.boundary.push_back((int)b);
  }

  // normalize clockwise triangles to CCW, recording the fact
  int flips = 0;
  for (long k = 0; k < nt; ++k) {
    for (int a = 0; a < 3; ++a) {
      int idx = m.tris(k, a);
      if (idx < 0 || idx >= m.n_nodes())
        throw std::runtime_error(path + ": validation error: triangle " + std::to_string(k) +
                                 " references node index " + std::to_string(idx) +
                                 " >= node count " + std::to_string(m.n_nodes()));
    }
    Eigen::Vector2d p0 = m.nodes.row(m.tris(k, 0)), p1 = m.nodes.row(m.tris(k, 1)),
                    p2 = m.nodes.row(m.tris(k, 2));
    double area2 = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p1.y() - p0.y()) * (p2.x() - p0.x());
    if (area2 < 0) {
      std::swap(m.tris(k, 1), m.tris(k, 2));
      ++flips;
    }
  }
  if (reoriented) *reoriented = flips;
  validate_mesh(m);
  return m;
}

void save_density(const DensityField& rho, const std::string& path) {
  std::string out = "bcdensity 1\n" + std::to_string((long)rho.size()) + "\n";
  for (long k = 0; k < rho.size(); ++k) out += fmt17(rho[k]) + "\n";
  io::write_file(path, out);
}

DensityField load_density(const std::string& path) {
  std::string text = io::read_file(path);
  std::istringstream ss(text);
  std::string l0;
  std::getline(ss, l0);
  if (l0.substr(0, 11) != "bcdensity 1")
    throw std::runtime_error(path + ":1: parse error: expected header 'bcdensity 1'");
  long k = -1;
  ss >> k;
  if (k < 0) throw std::runtime_error(path + ":2: parse error: expected triangle count");
  DensityField rho(k);
  for (long i = 0; i < k; ++i) {
    if (!(ss >> rho[i]))
      throw std::runtime_error(path + ":" + std::to_string(3 + i) + ": parse error: expected density value");
    if (rho[i] <= 0)
      throw std::runtime_error(path + ": validation error: non-positive density at triangle " +
                               std::to_string(i));
  }
  return rho;
}

std::vector<std::array<int, 2>> adjacent_triangle_pairs(const TriMesh& mesh) {
  std::map<std::pair<int, int>, std::vector<int>> edge_tris;
  for (int k = 0; k < mesh.n_tris(); ++k)
    for (int a = 0; a < 3; ++a) {
      int i = mesh.tris(k, a), j = mesh.tris(k, (a + 1) % 3);
      edge_tris[{std::min(i, j), std::max(i, j)}].push_back(k);
    }
  std::vector<std::array<int, 2>> pairs;
  for (auto& [e, ks] : edge_tris)
    if (ks.size() == 2) pairs.push_back({ks[0], ks[1]});
  return pairs;
}

double estimate_optical_radius(const TriMesh& mesh, const DensityField& rho) {
  if (rho.size() != mesh.n_tris())
    throw std::runtime_error("estimate_optical_radius: density size mismatch");
  std::map<std::pair<int, int>, std::vector<int>> edge_tris;
  for (int k = 0; k < mesh.n_tris(); ++k)
    for (int a = 0; a < 3; ++a) {
      int i = mesh.tris(k, a), j = mesh.tris(k, (a + 1) % 3);
      edge_tris[{std::min(i, j), std::max(i, j)}].push_back(k);
    }
  int n = mesh.n_nodes();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (auto& [e, ks] : edge_tris) {
    double mean = 0;
    for (int k : ks) mean += rho[k];
    mean /= (double)ks.size();
    double w = (mesh.nodes.row(e.first) - mesh.nodes.row(e.second)).norm() * std::sqrt(mean);
    adj[e.first].push_back({e.second, w});
    adj[e.second].push_back({e.first, w});
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  using QE = std::pair<double, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
  for (int b : mesh.boundary) {
    dist[b] = 0.0;
    pq.push({0.0, b});
  }
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (auto [v, w] : adj[u])
      if (d + w < dist[v]) {
        dist[v] = d + w;
        pq.push({dist[v], v});
      }
  }
  double mx = 0;
  for (double d : dist) {
    if (d == kInf) throw std::runtime_error("estimate_optical_radius: mesh graph is disconnected");
    mx = std::max(mx, d);
  }
  return mx;
}

}  // namespace bct
