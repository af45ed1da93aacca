#include "bct/config.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "bct/io.hpp"

namespace bct {

using nlohmann::json;

namespace {

long exact_ratio(double num, double den, const std::string& what) {
  if (!(den > 0)) throw ValidationError(what + ": denominator must be positive");
  double r = num / den;
  long n = std::lround(r);
  if (n < 1 || std::abs(r - n) > 1e-9 * std::max(1.0, std::abs(r))) {
    std::ostringstream os;
    os << what << " must be a positive integer, got " << r;
    throw ValidationError(os.str());
  }
  return n;
}

SampleSpec parse_sample(const json& j) {
  SampleSpec s;
  if (j.is_string()) {
    // shorthand: "constant 1.5" or a bare generator name
    std::istringstream is(j.get<std::string>());
    is >> s.generator;
    double v;
    if (is >> v) {
      s.constant_value = v;
      s.value = v;
    }
    return s;
  }
  if (!j.is_object()) throw ValidationError("sample: expected string or object");
  if (j.contains("file")) {
    s.file = j.at("file").get<std::string>();
    return s;
  }
  s.generator = j.value("generator", s.generator);
  s.constant_value = j.value("constant_value", j.value("value", s.constant_value));
  s.background = j.value("background", s.background);
  s.value = j.value("value", s.value);
  s.inner_radius = j.value("inner_radius", s.inner_radius);
  s.outer_radius = j.value("outer_radius", s.outer_radius);
  s.half_width = j.value("half_width", s.half_width);
  s.n_layers = j.value("n_layers", s.n_layers);
  s.fold_amplitude = j.value("fold_amplitude", s.fold_amplitude);
  s.jitter = j.value("jitter", s.jitter);
  if (j.contains("discs")) {
    for (const auto& d : j.at("discs")) {
      SampleSpec::Disc disc;
      disc.cx = d.at(0).get<double>();
      disc.cy = d.at(1).get<double>();
      disc.r = d.at(2).get<double>();
      disc.value = d.size() > 3 ? d.at(3).get<double>() : s.value;
      s.discs.push_back(disc);
    }
  }
  return s;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  }

  ExperimentConfig c;
  try {
    if (j.contains("mesh")) {
      const auto& m = j.at("mesh");
      c.n_rings = m.value("n_rings", c.n_rings);
      c.n_boundary = m.value("n_boundary", c.n_boundary);
    }
    if (j.contains("sample")) c.sample = parse_sample(j.at("sample"));
    if (j.contains("wavelet")) {
      const auto& w = j.at("wavelet");
      c.nu = w.value("nu", c.nu);
      c.t0 = w.value("t0", c.t0);
      c.nu_mult = w.value("nu_mult", c.nu_mult);
    }
    if (j.contains("times")) {
      const auto& t = j.at("times");
      c.T = t.value("T", c.T);
      c.T_factor = t.value("T_factor", c.T_factor);
      if (t.contains("dt")) {
        if (!(c.T > 0))
          throw ValidationError(origin + ": times.dt requires an explicit times.T");
        c.n_t = static_cast<int>(exact_ratio(c.T, t.at("dt").get<double>(), "T / dt"));
      } else {
        c.n_t = t.value("n_t", c.n_t);
      }
      if (t.contains("dt_solver")) {
        double dt = t.contains("dt") ? t.at("dt").get<double>() : c.T / c.n_t;
        if (!(c.T > 0))
          throw ValidationError(origin + ": times.dt_solver requires an explicit times.T");
        c.substeps =
            static_cast<int>(exact_ratio(dt, t.at("dt_solver").get<double>(), "dt / dt_solver"));
      } else {
        c.substeps = t.value("substeps", c.substeps);
      }
    }
    if (j.contains("control")) {
      const auto& k = j.at("control");
      c.svd_cutoff = k.value("svd_cutoff", c.svd_cutoff);
      c.block_weight = k.value("block_weight", c.block_weight);
      c.residual_ceiling = k.value("residual_ceiling", c.residual_ceiling);
    }
    if (j.contains("reconstruction")) {
      const auto& r = j.at("reconstruction");
      c.lambda_rel = r.value("lambda_rel", c.lambda_rel);
      if (r.contains("box")) {
        const auto& b = r.at("box");
        c.box_lo = b.at(0).get<double>();
        c.box_hi = b.at(1).get<double>();
      }
      c.area_weighted_delta = r.value("area_weighted_delta", c.area_weighted_delta);
      c.delta_ceiling = r.value("delta_ceiling", c.delta_ceiling);
    }
    c.oracle_mode = j.value("oracle_mode", c.oracle_mode);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    c.sample.seed = c.seed;
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  }

  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(io::read_file(path), path);
}

void validate_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ValidationError("config: " + msg); };
  if (c.n_rings < 1) fail("mesh.n_rings must be >= 1");
  if (c.n_boundary < 3) fail("mesh.n_boundary must be >= 3");
  if (c.T < 0) fail("times.T must be positive (or omitted to derive it)");
  if (!(c.T_factor > 0)) fail("times.T_factor must be positive");
  if (c.n_t < 1) fail("times.n_t must be >= 1");
  if (c.substeps < 1) fail("times.substeps must be >= 1");
  if (c.nu < 0 || c.t0 < 0) fail("wavelet.nu and wavelet.t0 must be nonnegative");
  if (!(c.nu_mult > 0)) fail("wavelet.nu_mult must be positive");
  if (c.svd_cutoff < 0) fail("control.svd_cutoff must be nonnegative");
  if (!(c.block_weight > 0)) fail("control.block_weight must be positive");
  if (c.residual_ceiling < 0) fail("control.residual_ceiling must be nonnegative");
  if (c.lambda_rel < 0) fail("reconstruction.lambda_rel must be nonnegative");
  if (!(c.box_lo > 0) || !(c.box_lo < c.box_hi))
    fail("reconstruction.box must satisfy 0 < lo < hi");
  if (c.delta_ceiling < 0) fail("reconstruction.delta_ceiling must be nonnegative");
  if (c.jobs < 1) fail("jobs must be >= 1");
  if (c.sample.file.empty()) {
    static const char* known[] = {"constant", "inclusions", "annulus", "waveguide", "folds"};
    bool ok = false;
    for (const char* k : known) ok = ok || c.sample.generator == k;
    if (!ok) fail("unknown sample generator '" + c.sample.generator + "'");
    if (!(c.sample.constant_value > 0) || !(c.sample.background > 0) || !(c.sample.value > 0))
      fail("sample densities must be positive");
    if (c.sample.jitter < 0 || c.sample.jitter >= 1) fail("sample.jitter must be in [0, 1)");
  }
}

}  // namespace bct
