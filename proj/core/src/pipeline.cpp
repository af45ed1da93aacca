#include "bct/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "bct/control.hpp"
#include "bct/fem.hpp"
#include "bct/forms.hpp"
#include "bct/harmonics.hpp"
#include "bct/io.hpp"
#include "bct/reconstruct.hpp"
#include "bct/samples.hpp"
#include "bct/wavesim.hpp"

namespace bct {

using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

void require_file(const std::string& path, const std::string& producer) {
  if (!io::file_exists(path))
    throw std::runtime_error("missing " + path + ": run '" + producer + "' first");
}

TriMesh load_mesh_artifact(const StagePaths& p) {
  require_file(p.mesh, "mesh-gen");
  return load_mesh(p.mesh);
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

// "key value" lines (the '#'-comment metadata embedded in dumps).
std::string meta_value(const std::string& meta, const std::string& key) {
  std::istringstream is(meta);
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k == key) {
      std::string v;
      ls >> v;
      return v;
    }
  }
  return "";
}

// ---- trace files -----------------------------------------------------------

void write_trace_file(const std::string& path, int alpha, double dt_solver,
                      const Eigen::MatrixXd& tr) {
  std::ostringstream h;
  h << "bctrace 1\n"
    << "control " << alpha << " dt_solver " << fmt17(dt_solver) << " cols " << tr.rows()
    << " steps " << tr.cols() << "\n";
  std::string out = h.str();
  out.reserve(out.size() + sizeof(double) * static_cast<size_t>(tr.size()));
  for (long s = 0; s < tr.cols(); ++s)  // one row per time step
    for (long i = 0; i < tr.rows(); ++i) {
      double v = tr(i, s);
      out.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
  io::write_file(path, out);
}

Eigen::MatrixXd parse_trace_bytes(const std::string& path, const std::string& bytes, int alpha,
                                  int nb) {
  size_t p1 = bytes.find('\n');
  size_t p2 = p1 == std::string::npos ? p1 : bytes.find('\n', p1 + 1);
  if (p2 == std::string::npos) throw std::runtime_error(path + ": truncated trace header");
  if (bytes.substr(0, p1) != "bctrace 1")
    throw std::runtime_error(path + ": not a trace file (bad magic)");
  std::istringstream hs(bytes.substr(p1 + 1, p2 - p1 - 1));
  std::string k1, k2, k3, k4;
  int a = -1;
  double dt = 0;
  long cols = 0, steps = 0;
  hs >> k1 >> a >> k2 >> dt >> k3 >> cols >> k4 >> steps;
  if (!hs || k1 != "control" || k2 != "dt_solver" || k3 != "cols" || k4 != "steps")
    throw std::runtime_error(path + ": malformed trace header");
  if (a != alpha)
    throw std::runtime_error(path + ": header says control " + std::to_string(a) + ", expected " +
                             std::to_string(alpha));
  if (cols != nb)
    throw std::runtime_error(path + ": trace has " + std::to_string(cols) +
                             " boundary nodes, mesh has " + std::to_string(nb));
  size_t need = sizeof(double) * static_cast<size_t>(cols) * static_cast<size_t>(steps);
  if (bytes.size() - (p2 + 1) != need)
    throw std::runtime_error(path + ": payload size does not match the header");
  Eigen::MatrixXd tr(cols, steps);
  const char* src = bytes.data() + p2 + 1;
  for (long s = 0; s < steps; ++s)
    for (long i = 0; i < cols; ++i) {
      double v;
      std::memcpy(&v, src, sizeof v);
      src += sizeof v;
      tr(i, s) = v;
    }
  return tr;
}

// ---- snapshot files (oracle mode) ------------------------------------------

void write_snapshots_file(const std::string& path, const TraceSet& ts) {
  const long n = ts.snap_u.at(0).rows();
  const long nt = ts.snap_u.at(0).cols();
  std::ostringstream h;
  h << "bcsnap 1\nn " << n << " n_b " << ts.snap_u.size() << " n_t " << nt << "\n";
  std::string out = h.str();
  for (size_t a = 0; a < ts.snap_u.size(); ++a) {
    out.append(reinterpret_cast<const char*>(ts.snap_u[a].data()),
               sizeof(double) * static_cast<size_t>(n * nt));
    out.append(reinterpret_cast<const char*>(ts.snap_v[a].data()),
               sizeof(double) * static_cast<size_t>(n * nt));
  }
  io::write_file(path, out);
}

void read_snapshots_file(const std::string& path, long n, int nb, long nt,
                         std::vector<Eigen::MatrixXd>& su, std::vector<Eigen::MatrixXd>& sv) {
  std::string bytes = io::read_file(path);
  size_t p1 = bytes.find('\n');
  size_t p2 = p1 == std::string::npos ? p1 : bytes.find('\n', p1 + 1);
  if (p2 == std::string::npos || bytes.substr(0, p1) != "bcsnap 1")
    throw std::runtime_error(path + ": not a snapshot file");
  std::istringstream hs(bytes.substr(p1 + 1, p2 - p1 - 1));
  std::string k1, k2, k3;
  long fn = 0, fnb = 0, fnt = 0;
  hs >> k1 >> fn >> k2 >> fnb >> k3 >> fnt;
  if (!hs || k1 != "n" || k2 != "n_b" || k3 != "n_t" || fn != n || fnb != nb || fnt != nt)
    throw std::runtime_error(path + ": snapshot header does not match the run");
  size_t need = sizeof(double) * static_cast<size_t>(2 * nb) * static_cast<size_t>(n * nt);
  if (bytes.size() - (p2 + 1) != need)
    throw std::runtime_error(path + ": payload size does not match the header");
  const char* src = bytes.data() + p2 + 1;
  su.assign(nb, Eigen::MatrixXd(n, nt));
  sv.assign(nb, Eigen::MatrixXd(n, nt));
  for (int a = 0; a < nb; ++a) {
    std::memcpy(su[a].data(), src, sizeof(double) * n * nt);
    src += sizeof(double) * n * nt;
    std::memcpy(sv[a].data(), src, sizeof(double) * n * nt);
    src += sizeof(double) * n * nt;
  }
}

// ---- harmonics CSV ----------------------------------------------------------

void save_harmonics_csv(const std::string& path, const TriMesh& mesh, const HarmonicBasis& hb,
                        const std::string& mesh_hash) {
  std::ostringstream os;
  os << "# bcharmonics 1 mesh_hash " << mesh_hash << " n_h " << hb.n_h << "\n";
  os << "node,x,y";
  for (int a = 0; a < hb.n_h; ++a) os << ",phi_" << a;
  for (int a = 0; a < hb.n_h; ++a) os << ",L_" << a;
  os << "\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    os << i << "," << fmt17(mesh.nodes(i, 0)) << "," << fmt17(mesh.nodes(i, 1));
    for (int a = 0; a < hb.n_h; ++a) os << "," << fmt17(hb.phi(i, a));
    for (int a = 0; a < hb.n_h; ++a) os << "," << fmt17(hb.L(i, a));
    os << "\n";
  }
  io::write_file(path, os.str());
}

std::vector<double> split_csv(const std::string& line) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos <= line.size()) {
    size_t c = line.find(',', pos);
    if (c == std::string::npos) c = line.size();
    out.push_back(std::strtod(line.c_str() + pos, nullptr));
    pos = c + 1;
  }
  return out;
}

HarmonicBasis load_harmonics_csv(const std::string& path, int n_nodes,
                                 std::string* mesh_hash_out) {
  std::istringstream is(io::read_file(path));
  std::string line;
  if (!std::getline(is, line) || line.rfind("# bcharmonics 1", 0) != 0)
    throw std::runtime_error(path + ": not a harmonics file");
  {
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      if (tok == "mesh_hash" && mesh_hash_out) ls >> *mesh_hash_out;
    }
  }
  if (!std::getline(is, line)) throw std::runtime_error(path + ": missing column header");
  int n_h = 0;
  {
    std::istringstream ls(line);
    std::string col;
    while (std::getline(ls, col, ','))
      if (col.rfind("phi_", 0) == 0) ++n_h;
  }
  if (n_h <= 0) throw std::runtime_error(path + ": no harmonic columns");
  HarmonicBasis hb;
  hb.n_h = n_h;
  hb.phi.resize(n_nodes, n_h);
  hb.L.resize(n_nodes, n_h);
  int row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (row >= n_nodes) throw std::runtime_error(path + ": more rows than mesh nodes");
    auto v = split_csv(line);
    if (static_cast<int>(v.size()) != 3 + 2 * n_h)
      throw std::runtime_error(path + ": bad column count at data row " + std::to_string(row));
    for (int a = 0; a < n_h; ++a) hb.phi(row, a) = v[3 + a];
    for (int a = 0; a < n_h; ++a) hb.L(row, a) = v[3 + n_h + a];
    ++row;
  }
  if (row != n_nodes)
    throw std::runtime_error(path + ": expected " + std::to_string(n_nodes) + " rows, got " +
                             std::to_string(row));
  return hb;
}

// ---- control coefficient file ----------------------------------------------

void save_control_coeffs(const std::string& path, const std::vector<ControlSolution>& sols,
                         const std::string& formdata_hash, const std::string& harmonics_hash) {
  std::ostringstream os;
  os << "bccontrolcoeffs 1\n";
  os << "# formdata_hash " << formdata_hash << "\n";
  os << "# harmonics_hash " << harmonics_hash << "\n";
  os << "n " << sols.at(0).c.size() << " n_h " << sols.size() << "\n";
  for (const auto& s : sols) {
    for (long i = 0; i < s.c.size(); ++i) os << (i ? " " : "") << fmt17(s.c[i]);
    os << "\n";
  }
  io::write_file(path, os.str());
}

std::vector<Eigen::VectorXd> load_control_coeffs(const std::string& path,
                                                 std::string* formdata_hash,
                                                 std::string* harmonics_hash) {
  std::istringstream is(io::read_file(path));
  std::string line;
  if (!std::getline(is, line) || line != "bccontrolcoeffs 1")
    throw std::runtime_error(path + ": not a control coefficient file");
  long n = -1, nh = -1;
  while (std::getline(is, line)) {
    if (line.rfind("# ", 0) == 0) {
      std::istringstream ls(line.substr(2));
      std::string k, v;
      ls >> k >> v;
      if (k == "formdata_hash" && formdata_hash) *formdata_hash = v;
      if (k == "harmonics_hash" && harmonics_hash) *harmonics_hash = v;
      continue;
    }
    std::istringstream ls(line);
    std::string k1, k2;
    ls >> k1 >> n >> k2 >> nh;
    if (!ls || k1 != "n" || k2 != "n_h")
      throw std::runtime_error(path + ": malformed size header");
    break;
  }
  if (n <= 0 || nh <= 0) throw std::runtime_error(path + ": missing size header");
  std::vector<Eigen::VectorXd> cs;
  for (long a = 0; a < nh; ++a) {
    if (!std::getline(is, line))
      throw std::runtime_error(path + ": missing coefficient row " + std::to_string(a));
    std::istringstream ls(line);
    Eigen::VectorXd c(n);
    for (long i = 0; i < n; ++i)
      if (!(ls >> c[i]))
        throw std::runtime_error(path + ": short coefficient row " + std::to_string(a));
    cs.push_back(std::move(c));
  }
  return cs;
}

// ---- estimate CSV ------------------------------------------------------------

void save_density_est_csv(const std::string& path, const TriMesh& mesh, const DensityField& rho,
                          const std::string& meta) {
  Eigen::MatrixXd cent = triangle_centroids(mesh);
  std::ostringstream os;
  os << "# bcdensityest 1 " << meta << "\n";
  os << "k,centroid_x,centroid_y,rho_est\n";
  for (int k = 0; k < mesh.n_tris(); ++k)
    os << k << "," << fmt17(cent(k, 0)) << "," << fmt17(cent(k, 1)) << "," << fmt17(rho[k])
       << "\n";
  io::write_file(path, os.str());
}

DensityField load_density_est_csv(const std::string& path, int n_tris) {
  std::istringstream is(io::read_file(path));
  std::string line;
  DensityField rho(n_tris);
  int row = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("k,", 0) == 0) continue;
    auto v = split_csv(line);
    if (v.size() < 4) throw std::runtime_error(path + ": bad row " + std::to_string(row));
    if (row >= n_tris) throw std::runtime_error(path + ": more rows than mesh triangles");
    rho[row++] = v[3];
  }
  if (row != n_tris)
    throw std::runtime_error(path + ": expected " + std::to_string(n_tris) + " rows, got " +
                             std::to_string(row));
  return rho;
}

// ---- stages -------------------------------------------------------------------

void stage_mesh_gen(const ExperimentConfig& cfg, const StagePaths& p, json*) {
  TriMesh mesh = generate_disk_mesh(cfg.n_rings, cfg.n_boundary);
  save_mesh(mesh, p.mesh);
}

void stage_sample_gen(const ExperimentConfig& cfg, const StagePaths& p, json*) {
  TriMesh mesh = load_mesh_artifact(p);
  DensityField rho = generate_sample(mesh, cfg.sample);
  save_density(rho, p.density);
}

void stage_simulate(const ExperimentConfig& cfg, const StagePaths& p, json* sum) {
  TriMesh mesh = load_mesh_artifact(p);
  require_file(p.density, "sample-gen");
  DensityField rho = load_density(p.density);
  if (rho.size() != mesh.n_tris())
    throw std::runtime_error(p.density + " does not match the mesh; rerun 'sample-gen'");

  DerivedParams d = derive_params(cfg, mesh);
  ControlBasis basis{RickerWavelet{d.nu, d.t0}, d.dt_offset, cfg.n_t, mesh.n_boundary()};
  TraceSet ts = generate_all_traces(mesh, rho, basis, d.dt_solver, cfg.oracle_mode, cfg.jobs);

  json manifest;
  manifest["format"] = "bctraces 1";
  manifest["mesh_hash"] = io::file_hash(p.mesh);
  manifest["density_hash"] = io::file_hash(p.density);
  manifest["n_b"] = basis.n_b;
  manifest["n_t"] = basis.n_t;
  manifest["T"] = basis.T();
  manifest["dt_offset"] = basis.dt_offset;
  manifest["dt_solver"] = ts.dt_solver;
  manifest["substeps"] = ts.substeps;
  manifest["n_steps"] = ts.n_steps;
  manifest["nu"] = d.nu;
  manifest["t0"] = d.t0;
  manifest["oracle_mode"] = cfg.oracle_mode;
  json files = json::array();
  for (int a = 0; a < basis.n_b; ++a) {
    std::string full = p.trace_file(a);
    write_trace_file(full, a, ts.dt_solver, ts.base[a]);
    std::string name = full.substr(p.traces_dir.size() + 1);
    files.push_back({{"control", a}, {"path", name}, {"hash", io::file_hash(full)}});
  }
  manifest["files"] = files;
  if (cfg.oracle_mode) {
    write_snapshots_file(p.snapshots, ts);
    manifest["snapshots"] = {{"path", "snapshots.bin"}, {"hash", io::file_hash(p.snapshots)}};
  }
  io::write_file(p.manifest, manifest.dump(2) + "\n");

  if (sum) {
    (*sum)["derived"] = {{"T", d.T},
                         {"dt_offset", d.dt_offset},
                         {"dt_solver", d.dt_solver},
                         {"nu", d.nu},
                         {"t0", d.t0},
                         {"t_star_box", d.t_star_box},
                         {"n_steps", ts.n_steps}};
    for (const auto& w : d.warnings) (*sum)["warnings"].push_back(w);
  }
}

void stage_forms(const ExperimentConfig&, const StagePaths& p, json* sum) {
  TriMesh mesh = load_mesh_artifact(p);
  require_file(p.manifest, "simulate");
  json man = parse_json_file(p.manifest);
  std::string mesh_hash = io::file_hash(p.mesh);
  if (man.value("mesh_hash", "") != mesh_hash)
    throw std::runtime_error(
        "traces were produced from a different mesh (hash mismatch); rerun 'simulate'");
  const int nb = man.at("n_b").get<int>();
  const int nt = man.at("n_t").get<int>();
  if (nb != mesh.n_boundary())
    throw std::runtime_error("trace manifest boundary count does not match the mesh");

  TraceSet ts;
  ts.dt_solver = man.at("dt_solver").get<double>();
  ts.n_steps = man.at("n_steps").get<int>();
  ts.substeps = man.at("substeps").get<int>();
  ts.n_t = nt;
  ts.base.assign(nb, Eigen::MatrixXd());
  for (const auto& f : man.at("files")) {
    int a = f.at("control").get<int>();
    std::string full = p.traces_dir + "/" + f.at("path").get<std::string>();
    require_file(full, "simulate");
    std::string bytes = io::read_file(full);
    if (io::hash_bytes(bytes) != f.at("hash").get<std::string>())
      throw std::runtime_error(full +
                               " does not match the trace manifest (hash mismatch); rerun "
                               "'simulate'");
    ts.base[a] = parse_trace_bytes(full, bytes, a, nb);
  }
  for (int a = 0; a < nb; ++a)
    if (ts.base[a].size() == 0)
      throw std::runtime_error("trace manifest has no file for control " + std::to_string(a) +
                               "; rerun 'simulate'");

  ControlBasis basis{RickerWavelet{man.at("nu").get<double>(), man.at("t0").get<double>()},
                     man.at("dt_offset").get<double>(), nt, nb};
  FormData fd = build_form_data(mesh, basis, ts);

  std::ostringstream meta;
  meta << "mesh_hash " << mesh_hash << "\n"
       << "manifest_hash " << io::file_hash(p.manifest) << "\n"
       << "oracle_mode " << (man.value("oracle_mode", false) ? 1 : 0) << "\n"
       << "asym_C " << fmt17(fd.asym_C) << "\n"
       << "asym_P " << fmt17(fd.asym_P) << "\n"
       << "asym_KIN " << fmt17(fd.asym_KIN);
  if (sum)
    (*sum)["forms"] = {
        {"asym_C", fd.asym_C}, {"asym_P", fd.asym_P}, {"asym_KIN", fd.asym_KIN}};

  if (man.value("oracle_mode", false) && man.contains("snapshots")) {
    // Labeled diagnostic: compare the boundary-computed forms against the
    // interior Gram matrices. Touches the true density, so oracle mode only.
    require_file(p.density, "sample-gen");
    DensityField rho = load_density(p.density);
    SpMat M = assemble_mass(mesh, rho);
    SpMat K = assemble_stiffness(mesh);
    std::string spath = p.traces_dir + "/" + man["snapshots"].value("path", "snapshots.bin");
    require_file(spath, "simulate");
    if (io::file_hash(spath) != man["snapshots"].value("hash", ""))
      throw std::runtime_error(spath + " does not match the trace manifest; rerun 'simulate'");
    std::vector<Eigen::MatrixXd> su, sv;
    read_snapshots_file(spath, mesh.n_nodes(), nb, nt, su, sv);
    const int N = nb * nt;
    Eigen::MatrixXd SU(mesh.n_nodes(), N), SV(mesh.n_nodes(), N);
    for (int a = 0; a < nb; ++a)
      for (int j = 0; j < nt; ++j) {
        SU.col(a * nt + j) = su[a].col(j);
        SV.col(a * nt + j) = sv[a].col(j);
      }
    Eigen::MatrixXd GC = SU.transpose() * (M * SU);
    Eigen::MatrixXd GP = SU.transpose() * (K * SU);
    Eigen::MatrixXd GK = SV.transpose() * (M * SV);
    double errC = (fd.C - GC).norm() / GC.norm();
    double errP = (fd.P - GP).norm() / GP.norm();
    double errK = (fd.KIN - GK).norm() / GK.norm();
    meta << "\noracle_errC " << fmt17(errC) << "\noracle_errP " << fmt17(errP)
         << "\noracle_errKIN " << fmt17(errK);
    if (sum) (*sum)["oracle"] = {{"errC", errC}, {"errP", errP}, {"errKIN", errK}};
  }
  save_form_data(fd, p.formdata, meta.str());
}

void stage_harmonics(const ExperimentConfig&, const StagePaths& p, json* sum) {
  TriMesh mesh = load_mesh_artifact(p);
  SpMat K = assemble_stiffness(mesh);
  HarmonicBasis hb = build_harmonic_basis(mesh, K);
  double max_res = 0;
  for (int a = 0; a < hb.n_h; ++a) {
    double ln = hb.L.col(a).norm();
    if (ln > 0) max_res = std::max(max_res, (K * hb.phi.col(a) - hb.L.col(a)).norm() / ln);
  }
  save_harmonics_csv(p.harmonics, mesh, hb, io::file_hash(p.mesh));
  if (sum) (*sum)["harmonics"] = {{"n_h", hb.n_h}, {"max_residual", max_res}};
}

void stage_control(const ExperimentConfig& cfg, const StagePaths& p, json* sum) {
  TriMesh mesh = load_mesh_artifact(p);
  require_file(p.formdata, "forms");
  require_file(p.harmonics, "harmonics");
  std::string mesh_hash = io::file_hash(p.mesh);
  std::string meta;
  FormData fd = load_form_data(p.formdata, &meta);
  if (meta_value(meta, "mesh_hash") != mesh_hash)
    throw std::runtime_error(
        "form data was produced from a different mesh (hash mismatch); rerun 'forms'");
  std::string hmesh;
  HarmonicBasis hb = load_harmonics_csv(p.harmonics, mesh.n_nodes(), &hmesh);
  if (hmesh != mesh_hash)
    throw std::runtime_error(
        "harmonics were produced from a different mesh (hash mismatch); rerun 'harmonics'");
  if (fd.n_b != mesh.n_boundary())
    throw std::runtime_error("form data boundary count does not match the mesh");

  auto sols = solve_all_controls(fd, hb, mesh, cfg.svd_cutoff, cfg.block_weight, 0.0);

  std::string fdh = io::file_hash(p.formdata);
  std::string hh = io::file_hash(p.harmonics);
  std::ostringstream os;
  os << "# bccontrolreport 1 formdata_hash " << fdh << " harmonics_hash " << hh << " cutoff "
     << fmt17(cfg.svd_cutoff) << " block_weight " << fmt17(cfg.block_weight) << "\n";
  os << "alpha,residual,phi,cnorm,rank\n";
  double max_res = 0, max_phi = 0, max_cn = 0;
  for (size_t a = 0; a < sols.size(); ++a) {
    os << a << "," << fmt17(sols[a].residual) << "," << fmt17(sols[a].phi) << ","
       << fmt17(sols[a].cnorm) << "," << sols[a].rank << "\n";
    max_res = std::max(max_res, sols[a].residual);
    max_phi = std::max(max_phi, std::abs(sols[a].phi));
    max_cn = std::max(max_cn, sols[a].cnorm);
  }
  io::write_file(p.control_report, os.str());
  save_control_coeffs(p.control_coeffs, sols, fdh, hh);
  if (sum)
    (*sum)["control"] = {{"rank", sols.at(0).rank},
                         {"max_residual", max_res},
                         {"max_abs_phi", max_phi},
                         {"max_cnorm", max_cn}};
  if (cfg.residual_ceiling > 0 && max_res > cfg.residual_ceiling)
    throw CeilingError("control residual " + fmt17(max_res) + " exceeds the configured ceiling " +
                       fmt17(cfg.residual_ceiling));
}

void stage_reconstruct(const ExperimentConfig& cfg, const StagePaths& p, json* sum) {
  TriMesh mesh = load_mesh_artifact(p);
  require_file(p.formdata, "forms");
  require_file(p.harmonics, "harmonics");
  require_file(p.control_coeffs, "control");
  FormData fd = load_form_data(p.formdata);
  HarmonicBasis hb = load_harmonics_csv(p.harmonics, mesh.n_nodes(), nullptr);
  std::string fdh, hh;
  auto cs = load_control_coeffs(p.control_coeffs, &fdh, &hh);
  if (fdh != io::file_hash(p.formdata))
    throw std::runtime_error(
        "control coefficients do not match the form data (hash mismatch); rerun 'control'");
  if (hh != io::file_hash(p.harmonics))
    throw std::runtime_error(
        "control coefficients do not match the harmonics (hash mismatch); rerun 'control'");
  std::vector<ControlSolution> sols(cs.size());
  for (size_t a = 0; a < cs.size(); ++a) sols[a].c = cs[a];

  ReconstructionSystem sys = assemble_density_system(mesh, hb, fd, sols, cfg.box_lo, cfg.box_hi,
                                                     cfg.lambda_rel);
  ReconstructionResult res = solve_density(sys);

  std::string ch = io::file_hash(p.control_coeffs);
  save_density_est_csv(p.density_est, mesh, res.estimate,
                       "mesh_hash " + io::file_hash(p.mesh) + " coeffs_hash " + ch);
  json rs = {{"residual", res.residual},
             {"objective", res.objective},
             {"lambda", sys.lambda},
             {"lambda_rel", cfg.lambda_rel},
             {"iterations", res.iterations},
             {"converged", res.converged},
             {"sigma_max", res.sigma_max},
             {"sigma_min", res.sigma_min},
             {"oracle_mode", cfg.oracle_mode}};
  io::write_file(p.recon_summary, rs.dump(2) + "\n");
  if (sum) (*sum)["reconstruction"] = rs;
}

void stage_score(const ExperimentConfig& cfg, const StagePaths& p, json* sum) {
  TriMesh mesh = load_mesh_artifact(p);
  require_file(p.density_est, "reconstruct");
  require_file(p.recon_summary, "reconstruct");
  DensityField est = load_density_est_csv(p.density_est, mesh.n_tris());
  json rs = parse_json_file(p.recon_summary);
  json sc;
  sc["residual"] = rs.value("residual", 0.0);
  double delta = -1;
  if (io::file_exists(p.density)) {
    DensityField truth = load_density(p.density);
    if (truth.size() != mesh.n_tris())
      throw std::runtime_error(p.density + " does not match the mesh");
    delta = relative_error(est, truth, mesh, cfg.area_weighted_delta);
    sc["delta"] = delta;
    sc["area_weighted"] = cfg.area_weighted_delta;
  }
  io::write_file(p.score, sc.dump(2) + "\n");
  if (sum) (*sum)["score"] = sc;
  if (cfg.delta_ceiling > 0 && delta >= 0 && delta > cfg.delta_ceiling)
    throw CeilingError("reconstruction delta " + fmt17(delta) + " exceeds the configured ceiling " +
                       fmt17(cfg.delta_ceiling));
}

using StageFn = void (*)(const ExperimentConfig&, const StagePaths&, json*);

const std::vector<std::pair<std::string, StageFn>>& stage_table() {
  static const std::vector<std::pair<std::string, StageFn>> table = {
      {"mesh-gen", stage_mesh_gen},   {"sample-gen", stage_sample_gen},
      {"simulate", stage_simulate},   {"forms", stage_forms},
      {"harmonics", stage_harmonics}, {"control", stage_control},
      {"reconstruct", stage_reconstruct}, {"score", stage_score}};
  return table;
}

}  // namespace

DerivedParams derive_params(const ExperimentConfig& cfg, const TriMesh& mesh) {
  DerivedParams d;
  DensityField cap = DensityField::Constant(mesh.n_tris(), cfg.box_hi);
  d.t_star_box = estimate_optical_radius(mesh, cap);
  d.T = cfg.T > 0 ? cfg.T : cfg.T_factor * d.t_star_box;
  d.dt_offset = d.T / cfg.n_t;
  d.dt_solver = d.dt_offset / cfg.substeps;
  d.nu = cfg.nu > 0 ? cfg.nu : cfg.nu_mult * 3.5 / d.T;
  d.t0 = cfg.t0 > 0 ? cfg.t0 : 1.5 / d.nu;
  if (d.T <= d.t_star_box)
    d.warnings.push_back("T = " + fmt17(d.T) + " does not exceed the estimated optical radius " +
                         fmt17(d.t_star_box) + " at the box ceiling density");
  return d;
}

StagePaths StagePaths::at(const std::string& dir) {
  StagePaths p;
  p.dir = dir;
  auto f = [&](const char* name) { return dir + "/" + name; };
  p.mesh = f("mesh.txt");
  p.density = f("density_true.txt");
  p.traces_dir = f("traces");
  p.manifest = f("traces/manifest.json");
  p.snapshots = f("traces/snapshots.bin");
  p.formdata = f("formdata.txt");
  p.harmonics = f("harmonics.csv");
  p.control_report = f("controls.csv");
  p.control_coeffs = f("control_coeffs.txt");
  p.density_est = f("density_est.csv");
  p.recon_summary = f("recon_summary.json");
  p.score = f("score.json");
  p.summary = f("summary.json");
  return p;
}

std::string StagePaths::trace_file(int alpha) const {
  char b[32];
  std::snprintf(b, sizeof b, "trace_%04d.bin", alpha);
  return traces_dir + "/" + b;
}

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [n, fn] : stage_table()) v.push_back(n);
    return v;
  }();
  return names;
}

void run_stage(const ExperimentConfig& cfg, const std::string& stage) {
  for (const auto& [name, fn] : stage_table())
    if (name == stage) {
      io::set_stage(name);
      try {
        fn(cfg, StagePaths::at(cfg.output_dir), nullptr);
      } catch (...) {
        io::set_stage("");
        throw;
      }
      io::set_stage("");
      return;
    }
  std::string known;
  for (const auto& [name, fn] : stage_table()) known += (known.empty() ? "" : ", ") + name;
  throw ValidationError("unknown stage '" + stage + "' (known: " + known + ")");
}

int run_pipeline(const ExperimentConfig& cfg) {
  StagePaths p = StagePaths::at(cfg.output_dir);
  json sum;
  sum["config"] = {{"n_rings", cfg.n_rings},
                   {"n_boundary", cfg.n_boundary},
                   {"sample", cfg.sample.file.empty() ? cfg.sample.generator
                                                      : "file:" + cfg.sample.file},
                   {"n_t", cfg.n_t},
                   {"substeps", cfg.substeps},
                   {"svd_cutoff", cfg.svd_cutoff},
                   {"block_weight", cfg.block_weight},
                   {"lambda_rel", cfg.lambda_rel},
                   {"box", {cfg.box_lo, cfg.box_hi}},
                   {"oracle_mode", cfg.oracle_mode},
                   {"seed", cfg.seed}};
  sum["warnings"] = json::array();
  int exit_code = 0;
  for (const auto& [name, fn] : stage_table()) {
    auto t0 = std::chrono::steady_clock::now();
    try {
      io::set_stage(name);
      fn(cfg, p, &sum);
      io::set_stage("");
    } catch (const CeilingError& e) {
      io::set_stage("");
      exit_code = 3;
      sum["error"] = {{"stage", name}, {"message", e.what()}, {"kind", "ceiling"}};
    } catch (const std::exception& e) {
      io::set_stage("");
      exit_code = 2;
      sum["error"] = {{"stage", name}, {"message", e.what()}, {"kind", "failure"}};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[bctomo] %-11s %s (%.2f s)\n", name.c_str(),
                exit_code == 0 ? "done" : "FAILED", secs);
    std::fflush(stdout);
    if (exit_code != 0) break;
  }
  sum["ok"] = exit_code == 0;
  sum["exit_code"] = exit_code;
  io::write_file(p.summary, sum.dump(2) + "\n");
  return exit_code;
}

}  // namespace bct
