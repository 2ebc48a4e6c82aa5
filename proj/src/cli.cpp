#include "curvex/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "curvex/isoperimetry.hpp"
#include "curvex/moments.hpp"
#include "curvex/mu_solver.hpp"
#include "curvex/quadrature.hpp"
#include "curvex/rigidity.hpp"

namespace curvex {

namespace {

constexpr const char* kVersion = "0.3.0";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& source) {
  Config c;
  c.source_ = source;
  std::string section;
  std::stringstream in(text);
  std::string raw;
  int line = 0;
  auto bad = [&](const std::string& msg) {
    throw Error(ErrorKind::ConfigInvalid, source + ":" + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line;
    std::string l = raw;
    const auto hash = l.find_first_of("#;");
    if (hash != std::string::npos) l = l.substr(0, hash);
    l = trim(l);
    if (l.empty()) continue;
    if (l.front() == '[') {
      if (l.back() != ']') bad("unterminated section header");
      section = trim(l.substr(1, l.size() - 2));
      if (section.empty()) bad("empty section name");
      continue;
    }
    const auto eq = l.find('=');
    if (eq == std::string::npos) bad("expected key = value");
    if (section.empty()) bad("key outside any [section]");
    const std::string key = trim(l.substr(0, eq));
    if (key.empty()) bad("missing key before '='");
    auto& sec = c.sections_[section];
    if (sec.count(key)) bad("duplicate key '" + key + "' in [" + section + "]");
    sec[key] = Entry{trim(l.substr(eq + 1)), line};
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::ConfigInvalid, path + ": cannot open config file");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

void Config::fail(const std::string& section, const std::string& key, const std::string& msg) const {
  const auto s = sections_.find(section);
  int line = 0;
  if (s != sections_.end()) {
    const auto k = s->second.find(key);
    if (k != s->second.end()) line = k->second.line;
  }
  std::string where = source_;
  if (line > 0) where += ":" + std::to_string(line);
  throw Error(ErrorKind::ConfigInvalid, where + ": [" + section + "] " + key + ": " + msg);
}

bool Config::has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

std::string Config::str(const std::string& section, const std::string& key, const std::string& def) const {
  const Entry* e = find(section, key);
  return e ? e->value : def;
}

std::string Config::str(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e) fail(section, key, "required field is missing");
  return e->value;
}

double Config::num(const std::string& section, const std::string& key, double def) const {
  return has(section, key) ? num(section, key) : def;
}

double Config::num(const std::string& section, const std::string& key) const {
  const std::string v = str(section, key);
  double d = 0.0;
  if (!parse_double(v, d)) fail(section, key, "expected a number, got '" + v + "'");
  return d;
}

int Config::integer(const std::string& section, const std::string& key, int def) const {
  if (!has(section, key)) return def;
  const std::string v = str(section, key);
  try {
    size_t used = 0;
    const long x = std::stol(v, &used);
    if (used == v.size() && x >= INT32_MIN && x <= INT32_MAX) return static_cast<int>(x);
  } catch (const std::exception&) {
  }
  fail(section, key, "expected an integer, got '" + v + "'");
}

bool Config::flag(const std::string& section, const std::string& key, bool def) const {
  if (!has(section, key)) return def;
  const std::string v = str(section, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(section, key, "expected true or false, got '" + v + "'");
}

std::vector<double> Config::list(const std::string& section, const std::string& key, std::vector<double> def) const {
  if (!has(section, key)) return def;
  std::vector<double> out;
  for (const auto& item : split(str(section, key), ',')) {
    double d = 0.0;
    if (!parse_double(item, d)) fail(section, key, "expected a comma-separated list of numbers, got '" + item + "'");
    out.push_back(d);
  }
  return out;
}

std::vector<std::vector<double>> Config::points(const std::string& section, const std::string& key,
                                                std::vector<std::vector<double>> def) const {
  if (!has(section, key)) return def;
  std::vector<std::vector<double>> out;
  for (const auto& pt : split(str(section, key), ';')) {
    std::vector<double> p;
    for (const auto& item : split(pt, ',')) {
      double d = 0.0;
      if (!parse_double(item, d)) fail(section, key, "bad coordinate '" + item + "'");
      p.push_back(d);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void Config::check_schema(const Schema& schema) const {
  for (const auto& [sec, keys] : sections_) {
    const auto s = schema.find(sec);
    for (const auto& [key, e] : keys) {
      if (s == schema.end())
        throw Error(ErrorKind::ConfigInvalid,
                    source_ + ":" + std::to_string(e.line) + ": section [" + sec + "] is not used by this experiment");
      if (!s->second.count(key)) fail(sec, key, "unknown field for this experiment");
    }
  }
}

nlohmann::json Config::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [sec, keys] : sections_)
    for (const auto& [key, e] : keys) j[sec][key] = e.value;
  return j;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"expand_L", "expand_W",  "volume", "isoprofile",
                                              "symmetrize", "mu", "rigidity", "moments_selftest"};
  return names;
}

std::vector<PlotRow> plot_rows(const std::vector<SeriesSample>& samples, const SeriesCoefficients& fit,
                               const SeriesCoefficients& prediction) {
  if (samples.empty()) throw Error(ErrorKind::InvalidSpec, "no samples to plot");
  std::vector<PlotRow> rows;
  for (const auto& s : samples) {
    PlotRow r;
    r.t = s.t;
    r.value = s.value;
    r.fitted = fit.c0 + fit.c1 * s.t + fit.c2 * s.t * s.t;
    r.predicted = prediction.c0 + prediction.c1 * s.t + prediction.c2 * s.t * s.t;
    r.residual = r.value - r.fitted;
    rows.push_back(r);
  }
  return rows;
}

void write_plot_rows(const std::vector<PlotRow>& rows, const std::string& path) {
  if (rows.empty()) throw Error(ErrorKind::InvalidSpec, "no samples to plot");
  std::ostringstream out;
  out.precision(17);
  out << "t,value,fitted,predicted,residual\n";
  for (const auto& r : rows) out << r.t << ',' << r.value << ',' << r.fitted << ',' << r.predicted << ',' << r.residual << '\n';
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + path);
  f << out.str();
  if (!f) throw Error(ErrorKind::IoError, "write failed for " + path);
}

void emit_plotdata(const std::vector<SeriesSample>& samples, const SeriesCoefficients& fit,
                   const SeriesCoefficients& prediction, const std::string& path) {
  write_plot_rows(plot_rows(samples, fit, prediction), path);
}

namespace {

using nlohmann::json;

struct Tolerance {
  double rel, abs;
  double allowed(double predicted) const { return std::max(abs, rel * std::abs(predicted)); }
};

Tolerance tolerance(const Config& c, const std::string& coeff, Tolerance def) {
  return {c.num("tolerance", coeff + "_rel", def.rel), c.num("tolerance", coeff + "_abs", def.abs)};
}

QuadratureSpec read_quadrature(const Config& c, std::optional<std::uint64_t> seed, int n) {
  QuadratureSpec q;
  const std::string rule = c.str("quadrature", "rule", "product_hermite");
  if (rule == "product_hermite") q.rule = QuadRule::ProductHermite;
  else if (rule == "radial_sphere") q.rule = QuadRule::RadialSphere;
  else c.fail("quadrature", "rule", "expected product_hermite or radial_sphere, got '" + rule + "'");
  q.order = c.integer("quadrature", "order", q.order);
  q.c_trunc = c.num("quadrature", "c_trunc", q.c_trunc);
  q.target_tol = c.num("quadrature", "target_tol", q.target_tol);
  q.sphere_resolution = c.integer("quadrature", "sphere_resolution", q.sphere_resolution);
  q.mc_samples = c.integer("quadrature", "mc_samples", q.mc_samples);
  if (seed) q.seed = *seed;
  else if (n >= 5) c.fail("chart", "n", "a --seed is required for n >= 5 (Monte Carlo sphere rule)");
  try {
    q.validate();
  } catch (const Error& e) {
    c.fail("quadrature", "order", e.what());
  }
  return q;
}

struct Setup {
  std::shared_ptr<const MetricChart> chart;
  ModelSpec spec;
  std::vector<double> point;
};

Setup read_chart(const Config& c) {
  Setup s;
  const std::string kind = c.str("chart", "kind");
  const auto k = model_kind_from_string(kind);
  if (!k) c.fail("chart", "kind", "unknown chart '" + kind + "'");
  s.spec.kind = *k;
  s.spec.n = c.integer("chart", "n", 3);
  if (s.spec.n < 2 || s.spec.n > 6) c.fail("chart", "n", "dimension must be in 2..6");
  s.spec.K = c.num("chart", "K", 0.0);
  s.spec.radius = c.num("chart", "radius", 0.0);
  if (c.has("chart", "epsilon") || c.has("chart", "sigma")) {
    Perturbation p;
    p.epsilon = c.num("chart", "epsilon", 0.0);
    p.sigma = c.num("chart", "sigma", 1.0);
    p.center = c.list("chart", "center", {});
    s.spec.perturbation = p;
  }
  try {
    s.chart = std::make_shared<const MetricChart>(make_chart(s.spec));
  } catch (const Error& e) {
    c.fail("chart", "kind", e.what());
  }
  s.point = c.list("point", "p", std::vector<double>(static_cast<size_t>(s.spec.n), 0.0));
  if (static_cast<int>(s.point.size()) != s.spec.n) c.fail("point", "p", "needs exactly n coordinates");
  return s;
}

struct TfSetup {
  TestFunction tf;
  CurvatureData curv;
  double alpha = 0.0;
  std::string a_mode;
};

TfSetup read_test_function(const Config& c, const Setup& s, double default_alpha_scale) {
  TfSetup r;
  const int n = s.spec.n;
  r.curv = curvature_at(*s.chart, s.point);
  const double rs = c.num("test_function", "support_radius", 2.0);
  const double r0 = c.num("test_function", "normal_radius", 1.05 * rs);
  auto nc = std::make_shared<const NormalChart>(build_normal_chart(s.chart, s.point, r0));
  r.a_mode = c.str("test_function", "a", "optimal");
  std::optional<Sym2> custom;
  AMode mode = AMode::Custom;
  if (r.a_mode == "optimal") mode = AMode::Optimal;
  else if (r.a_mode == "zero") custom = Sym2(n);
  else if (r.a_mode == "diagonal") {
    const auto d = c.list("test_function", "a_diag", {});
    if (static_cast<int>(d.size()) != n) c.fail("test_function", "a_diag", "needs n entries");
    custom = Sym2::diagonal(d);
  } else if (r.a_mode == "matrix") {
    const auto m = c.list("test_function", "a_matrix", {});
    if (static_cast<int>(m.size()) != n * n) c.fail("test_function", "a_matrix", "needs n*n entries");
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = m[static_cast<size_t>(i * n + j)];
    try {
      custom = Sym2::from_matrix(M);
    } catch (const Error& e) {
      c.fail("test_function", "a_matrix", e.what());
    }
  } else {
    c.fail("test_function", "a", "expected optimal, zero, diagonal or matrix");
  }
  const std::string alpha = c.str("test_function", "alpha", "optimal");
  if (alpha == "optimal") r.alpha = default_alpha_scale * r.curv.sc;
  else if (!parse_double(alpha, r.alpha)) c.fail("test_function", "alpha", "expected a number or 'optimal'");
  r.tf = build_test_function(nc, mode, custom, r.alpha, rs);
  return r;
}

json coeffs(const SeriesCoefficients& s) { return {{"c1", s.c1}, {"c2", s.c2}}; }

json null_pair() { return {{"c1", nullptr}, {"c2", nullptr}}; }

json extracted(const SeriesCoefficients& s) {
  return {{"c1", s.c1},
          {"c2", s.c2},
          {"stderr", {{"c1", s.stderr_[1]}, {"c2", s.stderr_[2]}}},
          {"systematic", {{"c1", s.systematic[1]}, {"c2", s.systematic[2]}}}};
}

json null_extracted() { return {{"c1", nullptr}, {"c2", nullptr}, {"stderr", nullptr}, {"systematic", nullptr}}; }

// compares c1 and c2; margins are allowed − |difference|
bool compare(const SeriesCoefficients& pred, const SeriesCoefficients& ext, Tolerance t1, Tolerance t2, json& margins,
             json& policy) {
  const double m1 = t1.allowed(pred.c1) - std::abs(ext.c1 - pred.c1);
  const double m2 = t2.allowed(pred.c2) - std::abs(ext.c2 - pred.c2);
  margins["c1"] = m1;
  margins["c2"] = m2;
  policy["c1"] = {{"rel", t1.rel}, {"abs", t1.abs}};
  policy["c2"] = {{"rel", t2.rel}, {"abs", t2.abs}};
  return m1 >= 0.0 && m2 >= 0.0;
}

TGrid read_grid(const Config& c, int n, double rs, double c2_scale) {
  const std::string tm = c.str("series", "t_max", "auto");
  double t_max = 0.0;
  if (tm == "auto") t_max = std::min(5e-4, choose_t_max(n, rs, std::max(c2_scale, 1e-3)));
  else if (!parse_double(tm, t_max) || !(t_max > 0.0)) c.fail("series", "t_max", "expected a positive number or 'auto'");
  const int points = c.integer("series", "points", 9);
  const double factor = c.num("series", "factor", 0.7071067811865476);
  try {
    return make_t_grid(t_max, points, factor);
  } catch (const Error& e) {
    c.fail("series", "points", e.what());
  }
}

struct Outcome {
  json predicted = null_pair();
  json extracted = null_extracted();
  json margins = json::object();
  json policy = json::object();
  json details = json::object();
  bool pass = false;
  std::vector<PlotRow> rows;
};

Outcome run_expand(const Config& c, const Setup& s, FunctionalKind kind, std::optional<std::uint64_t> seed) {
  const bool is_L = kind == FunctionalKind::L;
  const TfSetup t = read_test_function(c, s, is_L ? -1.0 / 3.0 : 0.0);
  const QuadratureSpec q = read_quadrature(c, seed, s.spec.n);
  SeriesCoefficients pred;
  if (is_L) pred = predict_L(t.curv, t.tf.a, t.alpha);
  else pred = predict_W(t.curv, t.tf.a);
  const TGrid grid = read_grid(c, s.spec.n, t.tf.support_radius, std::abs(pred.c2));
  const auto samples = sample_series(t.tf, kind, grid, q);
  const SeriesCoefficients ext = extract_series(samples, SeriesModel::Linear12, std::abs(pred.c2));
  Outcome o;
  o.predicted = coeffs(pred);
  o.extracted = extracted(ext);
  o.pass = compare(pred, ext, tolerance(c, "c1", {0.005, 1e-6}), tolerance(c, "c2", {0.05, 1e-4}), o.margins, o.policy);
  o.rows = plot_rows(samples, ext, pred);
  o.details = {{"a_mode", t.a_mode},
               {"alpha", t.alpha},
               {"scalar_curvature", t.curv.sc},
               {"t_grid", grid.values},
               {"positivity_violated", t.tf.positivity_violated}};
  return o;
}

Outcome run_volume(const Config& c, const Setup& s, std::optional<std::uint64_t> seed) {
  const int n = s.spec.n;
  const QuadratureSpec q = read_quadrature(c, seed, n);
  const double r_max = c.num("volume", "r_max", 0.2);
  const int points = c.integer("volume", "points", 9);
  const CurvatureData curv = curvature_at(*s.chart, s.point);
  const NormalChart nc = build_normal_chart(s.chart, s.point, c.num("volume", "normal_radius", 1.05 * r_max));
  const VolumeCoefficients vp = predict_volume(curv);
  // series in s = r²
  const TGrid grid = make_t_grid(r_max * r_max, points, c.num("volume", "factor", 0.7071067811865476));
  std::vector<SeriesSample> samples;
  for (double sq : grid.values) {
    const double r = std::sqrt(sq);
    const double ratio = ball_volume(nc, r, q) / (quad::unit_ball_volume(n) * std::pow(r, n));
    samples.push_back({sq, ratio - 1.0, 1e-15});
  }
  const SeriesCoefficients ext = extract_series(samples, SeriesModel::Linear12);
  SeriesCoefficients pred;
  pred.c1 = vp.coeff_r2;
  pred.c2 = vp.coeff_r4;
  Outcome o;
  o.predicted = coeffs(pred);
  o.extracted = extracted(ext);
  o.pass = compare(pred, ext, tolerance(c, "c1", {0.01, 1e-8}), tolerance(c, "c2", {0.05, 1e-6}), o.margins, o.policy);
  o.rows = plot_rows(samples, ext, pred);
  o.details = {{"variable", "r^2"}, {"r_max", r_max}};
  return o;
}

Outcome run_isoprofile(const Config& c, const Setup& s, std::optional<std::uint64_t> seed) {
  const int n = s.spec.n;
  QuadratureSpec q = read_quadrature(c, seed, n);
  if (!c.has("quadrature", "rule")) q.rule = QuadRule::RadialSphere;
  const double K = c.num("isoprofile", "K", s.spec.K);
  const auto betas = c.list("isoprofile", "volumes", {1e-3, 1e-2});
  const double tol = c.num("tolerance", "probe_rel", 1e-6);
  double beta_max = 0.0;
  for (double b : betas) beta_max = std::max(beta_max, b);
  const double r_guess = std::pow(beta_max / quad::unit_ball_volume(n), 1.0 / n);
  const NormalChart nc =
      build_normal_chart(s.chart, s.point, std::min(2.0 * r_guess, 0.9 * injectivity_bound(*s.chart)));
  Outcome o;
  o.pass = true;
  json probes = json::array();
  double worst = std::numeric_limits<double>::infinity();
  for (double b : betas) {
    const double r = geodesic_ball_radius(nc, b, q);
    const double area = geodesic_sphere_area(nc, r, q);
    const double model = iso_profile(n, K, b);
    const double margin = area / model - 1.0;
    worst = std::min(worst, margin + tol);
    probes.push_back({{"volume", b}, {"radius", r}, {"area", area}, {"model_area", model}, {"margin", margin}});
  }
  o.margins["probe"] = worst;
  o.policy["probe_rel"] = tol;
  o.pass = worst >= 0.0;
  o.details = {{"K", K}, {"probes", probes}, {"label", "necessary-condition probe on geodesic balls"}};
  return o;
}

Outcome run_symmetrize(const Config& c, const Setup& s, std::optional<std::uint64_t> seed) {
  const TfSetup t = read_test_function(c, s, 0.0);
  QuadratureSpec q = read_quadrature(c, seed, s.spec.n);
  if (!c.has("quadrature", "rule")) q.rule = QuadRule::RadialSphere;
  if (!c.has("quadrature", "sphere_resolution")) q.sphere_resolution = 24;
  const double time = c.num("symmetrize", "t", 0.008);
  const double K = c.num("symmetrize", "K", s.spec.K);
  const int levels = c.integer("symmetrize", "levels", 256);
  const double tol = c.num("tolerance", "preservation", 1e-8);
  const SymmetrizeResult sym = symmetrize(t.tf, time, K, levels, q);
  const FunctionalValue direct = eval_L(t.tf, time, QuadratureSpec{});
  const FunctionalComponents bar = sym.profile.components();
  Outcome o;
  const double dm = std::abs(bar.mass - direct.components.mass) / direct.components.mass;
  const double de = std::abs(bar.entropy - direct.components.entropy) / std::max(1.0, std::abs(direct.components.entropy));
  const double gap = direct.components.dirichlet - bar.dirichlet;
  double eq = 0.0;
  const double top = peak_value(t.tf, time);
  for (double frac : {0.9, 0.5, 0.1, 1e-3}) {
    const double lev = frac * top * 0.997;
    const double rad = sym.profile.radius_of_level(lev);
    const double model = K == 0.0 ? quad::unit_ball_volume(s.spec.n) * std::pow(rad, s.spec.n)
                                  : model_ball_volume(s.spec.n, K, rad);
    const double v = superlevel_volume(t.tf, time, lev, q);
    eq = std::max(eq, std::abs(model - v) / v);
  }
  o.margins = {{"mass", tol - dm},
               {"entropy", tol - de},
               {"dirichlet_gap", gap + tol * direct.components.dirichlet},
               {"equimeasurability", tol - eq}};
  o.policy = {{"preservation", tol}};
  o.pass = true;
  for (const auto& [k, v] : o.margins.items()) o.pass = o.pass && v.get<double>() >= 0.0;
  o.details = {{"t", time},
               {"K", K},
               {"levels", levels},
               {"degenerate_levels", sym.degenerate_levels},
               {"mass", {bar.mass, direct.components.mass}},
               {"entropy", {bar.entropy, direct.components.entropy}},
               {"dirichlet", {bar.dirichlet, direct.components.dirichlet}},
               {"L_symmetrized", reconstruct_L(bar, s.spec.n, time)},
               {"L_direct", direct.value}};
  return o;
}

Outcome run_mu(const Config& c, const Setup& s) {
  if (s.spec.kind != ModelKind::Flat && s.spec.kind != ModelKind::SpaceForm)
    c.fail("chart", "kind", "mu runs on radial balls of flat or space_form charts");
  RadialDomain dom;
  dom.n = s.spec.n;
  dom.K = s.spec.kind == ModelKind::Flat ? 0.0 : s.spec.K;
  dom.R = c.num("mu", "R", 1.0);
  dom.m = c.integer("mu", "m", 256);
  MuOptions mo;
  mo.basis = c.integer("mu", "basis", mo.basis);
  mo.max_iter = c.integer("mu", "max_iter", mo.max_iter);
  const std::string init = c.str("mu", "init", "gaussian");
  if (init != "gaussian" && init != "uniform") c.fail("mu", "init", "expected gaussian or uniform");
  const auto times = c.list("mu", "t", {8e-3, 4e-3, 2e-3, 1e-3});
  const double gamma = c.num("mu", "gamma", 0.0);
  const double Q = c.num("mu", "Q", 0.0);
  std::vector<MuSample> samples;
  json runs = json::array();
  bool converged = true;
  for (double t : times) {
    const MuEstimate e = minimize_W(dom, t, init == "gaussian" ? MuInit::Gaussian : MuInit::Uniform, mo);
    converged = converged && e.converged;
    samples.push_back({t, e.mu});
    runs.push_back({{"t", t},
                    {"mu", e.mu},
                    {"grad_norm", e.grad_norm},
                    {"iterations", e.iterations},
                    {"mesh_delta", e.mesh_delta},
                    {"constraint_residual", e.constraint_residual},
                    {"negative_iterates", e.negative_iterates},
                    {"monotone", e.monotone},
                    {"converged", e.converged}});
  }
  const MuBoundReport rep = mu_bound_report(samples, gamma, Q);
  const double rm2 = 2.0 * dom.n * (dom.n - 1) * dom.K * dom.K;
  SeriesCoefficients pred, ext;
  pred.c2 = -rm2 / 6.0;
  ext.c2 = -rep.q;
  ext.stderr_[2] = rep.q_stderr;
  Outcome o;
  o.predicted = coeffs(pred);
  o.extracted = extracted(ext);
  const Tolerance t2 = tolerance(c, "c2", {0.05, 1e-3});
  o.margins["c2"] = t2.allowed(pred.c2) - std::abs(ext.c2 - pred.c2);
  o.margins["converged"] = converged ? 0.0 : -1.0;
  o.policy["c2"] = {{"rel", t2.rel}, {"abs", t2.abs}};
  o.pass = o.margins["c2"].get<double>() >= 0.0 && converged;
  std::vector<SeriesSample> ss;
  for (const auto& x : samples) ss.push_back({x.t, x.mu, 0.0});
  std::sort(ss.begin(), ss.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  o.rows = plot_rows(ss, ext, pred);
  o.details = {{"runs", runs},
               {"q", rep.q},
               {"q_stderr", rep.q_stderr},
               {"gamma", gamma},
               {"Q", Q},
               {"within", rep.within},
               {"implied_rm_bound", rep.implied_rm_bound},
               {"R", dom.R},
               {"K", dom.K}};
  return o;
}

Outcome run_rigidity(const Config& c, const Setup& s) {
  PipelineOptions po;
  po.tol = c.num("rigidity", "tol", po.tol);
  po.extended = c.flag("rigidity", "extended", false);
  const double K = c.num("rigidity", "K", s.spec.K);
  const auto pts = c.points("rigidity", "points", {s.point});
  for (const auto& p : pts)
    if (static_cast<int>(p.size()) != s.spec.n) c.fail("rigidity", "points", "every point needs n coordinates");
  const auto betas = c.list("rigidity", "volumes", {});
  const std::string expect = c.str("rigidity", "expect", "consistent_with_rigidity");
  if (expect != "consistent_with_rigidity" && expect != "hypothesis_violated" && expect != "inconclusive")
    c.fail("rigidity", "expect", "unknown verdict '" + expect + "'");
  const RigidityReport rep = theorem_1_1_pipeline(s.chart, pts, K, betas, po);
  Outcome o;
  json checks = json::array();
  auto role = [](CheckRole r) {
    return r == CheckRole::Hypothesis ? "hypothesis" : r == CheckRole::Probe ? "necessary_condition_probe" : "conclusion";
  };
  for (const Check& ck : rep.checks)
    checks.push_back({{"name", ck.name},
                      {"role", role(ck.role)},
                      {"point", ck.point},
                      {"margin", ck.margin},
                      {"tolerance", ck.tolerance},
                      {"holds", ck.holds}});
  double worst_h = std::numeric_limits<double>::infinity(), worst_c = worst_h;
  for (const Check& ck : rep.checks) {
    if (ck.role == CheckRole::Conclusion) worst_c = std::min(worst_c, ck.margin);
    else worst_h = std::min(worst_h, ck.margin);
  }
  o.margins = {{"hypotheses", worst_h}, {"conclusions", worst_c}};
  o.policy = {{"tol", po.tol}};
  o.pass = to_string(rep.verdict) == expect;
  o.details = {{"verdict", to_string(rep.verdict)}, {"expected", expect}, {"checks", checks}, {"violations", rep.violations}};
  return o;
}

Outcome run_moments(const Config& c, std::optional<std::uint64_t> seed) {
  const auto dims = c.list("moments", "n", {2, 3, 4});
  const auto times = c.list("moments", "t", {0.01, 0.1});
  const int draws = c.integer("moments", "samples", 20);
  const int order = c.integer("moments", "order", 12);
  const double tol = c.num("tolerance", "moments_rel", 1e-10);
  std::mt19937_64 rng(seed.value_or(20240601));
  std::normal_distribution<double> g(0.0, 1.0);
  std::map<std::string, double> worst{{"radial", 0.0}, {"quadratic", 0.0}, {"weighted_quadratic", 0.0},
                                      {"quartic", 0.0}, {"weighted_quartic", 0.0}};
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  for (double nd : dims) {
    const int n = static_cast<int>(nd);
    if (n < 1 || n > 6 || n != nd) c.fail("moments", "n", "dimensions must be integers in 1..6");
    for (double t : times) {
      const GaussianWeight w(n, t);
      auto r2t = [t](std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s / t;
      };
      worst["radial"] = std::max(worst["radial"], rel(gaussian_expectation(w, r2t, order), moment_radial(w)));
      for (int k = 0; k < draws; ++k) {
        Sym2 A(n);
        for (int i = 0; i < n; ++i)
          for (int j = i; j < n; ++j) A.set(i, j, g(rng));
        Tensor4 l(n);
        for (auto& v : l.data()) v = g(rng);
        auto qa = [&](std::span<const double> x) { return A.quadratic_form(x.data()); };
        auto ql = [&](std::span<const double> x) {
          double s = 0.0;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) s += l(i, j, a, b) * x[i] * x[j] * x[a] * x[b];
          return s;
        };
        auto upd = [&](const char* name, double quad, double closed) {
          worst[name] = std::max(worst[name], rel(quad, closed));
        };
        upd("quadratic", gaussian_expectation(w, qa, order), moment_quadratic(w, A, false));
        upd("weighted_quadratic", gaussian_expectation(w, [&](auto x) { return qa(x) * r2t(x); }, order),
            moment_quadratic(w, A, true));
        upd("quartic", gaussian_expectation(w, ql, order), moment_quartic(w, l, false));
        upd("weighted_quartic", gaussian_expectation(w, [&](auto x) { return ql(x) * r2t(x); }, order),
            moment_quartic(w, l, true));
      }
    }
  }
  Outcome o;
  o.pass = true;
  for (const auto& [k, v] : worst) {
    o.margins[k] = tol - v;
    o.pass = o.pass && v <= tol;
  }
  o.policy = {{"moments_rel", tol}};
  o.details = {{"worst_relative_error", worst}, {"dimensions", dims}, {"times", times}, {"samples", draws}};
  return o;
}

Config::Schema schema_for(const std::string& e) {
  Config::Schema s{{"run", {"seed"}},
                   {"tolerance", {"c1_rel", "c1_abs", "c2_rel", "c2_abs", "probe_rel", "preservation", "moments_rel"}}};
  if (e == "moments_selftest") {
    s["moments"] = {"n", "t", "samples", "order"};
    return s;
  }
  s["chart"] = {"kind", "n", "K", "radius", "epsilon", "sigma", "center"};
  s["point"] = {"p"};
  s["quadrature"] = {"rule", "order", "c_trunc", "target_tol", "sphere_resolution", "mc_samples"};
  const std::set<std::string> tf{"a", "a_diag", "a_matrix", "alpha", "support_radius", "normal_radius"};
  if (e == "expand_L" || e == "expand_W") {
    s["test_function"] = tf;
    s["series"] = {"t_max", "points", "factor"};
  } else if (e == "volume") {
    s["volume"] = {"r_max", "points", "factor", "normal_radius"};
  } else if (e == "isoprofile") {
    s["isoprofile"] = {"K", "volumes"};
  } else if (e == "symmetrize") {
    s["test_function"] = tf;
    s["symmetrize"] = {"t", "K", "levels"};
  } else if (e == "mu") {
    s.erase("quadrature");
    s.erase("point");
    s["mu"] = {"R", "m", "basis", "max_iter", "init", "t", "gamma", "Q"};
  } else if (e == "rigidity") {
    s.erase("quadrature");
    s["rigidity"] = {"tol", "extended", "K", "points", "volumes", "expect"};
  }
  return s;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

}  // namespace

RunResult run_experiment(const RunOptions& opts) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), opts.experiment) == names.end())
    throw Error(ErrorKind::ConfigInvalid, "unknown experiment '" + opts.experiment + "'");
  const Config& c = opts.config;
  c.check_schema(schema_for(opts.experiment));
  std::optional<std::uint64_t> seed = opts.seed;
  if (!seed && c.has("run", "seed")) {
    const double s = c.num("run", "seed");
    if (s < 0 || s != std::floor(s)) c.fail("run", "seed", "expected a nonnegative integer");
    seed = static_cast<std::uint64_t>(s);
  }
  Outcome o;
  const std::string& e = opts.experiment;
  if (e == "moments_selftest") {
    o = run_moments(c, seed);
  } else {
    const Setup s = read_chart(c);
    if (e == "expand_L") o = run_expand(c, s, FunctionalKind::L, seed);
    else if (e == "expand_W") o = run_expand(c, s, FunctionalKind::W, seed);
    else if (e == "volume") o = run_volume(c, s, seed);
    else if (e == "isoprofile") o = run_isoprofile(c, s, seed);
    else if (e == "symmetrize") o = run_symmetrize(c, s, seed);
    else if (e == "mu") o = run_mu(c, s);
    else o = run_rigidity(c, s);
  }

  RunResult r;
  r.pass = o.pass;
  r.rows = std::move(o.rows);
  json& d = r.doc;
  d["config"] = c.to_json();
  d["experiment"] = e;
  d["predicted"] = o.predicted;
  d["extracted"] = o.extracted;
  d["pass"] = o.pass;
  d["margins"] = o.margins;
  d["tolerance_policy"] = o.policy;
  d["details"] = o.details;
  d["versions"] = {{"curvex", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR)}};
  d["seed"] = seed ? json(*seed) : json(nullptr);
  if (opts.timestamp) d["timestamp"] = utc_now();

  if (!opts.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(opts.out_dir, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + opts.out_dir);
    const std::filesystem::path base = std::filesystem::path(opts.out_dir) / e;
    std::ofstream f(base.string() + ".json", std::ios::binary);
    if (!f) throw Error(ErrorKind::IoError, "cannot write " + base.string() + ".json");
    f << d.dump(2) << '\n';
    if (!r.rows.empty()) write_plot_rows(r.rows, base.string() + ".csv");
  }
  return r;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"curvex: small-time expansions, symmetrization and mu estimates on model charts"};
  std::string experiment, config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool no_timestamp = false;
  app.add_option("experiment", experiment, "one of: expand_L expand_W volume isoprofile symmetrize mu rigidity moments_selftest")
      ->required()
      ->check(CLI::IsMember(experiment_names()));
  app.add_option("--config", config_path, "INI-style config file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "seed for Monte Carlo rules and random draws");
  app.add_flag("--no-timestamp", no_timestamp, "omit the timestamp so output is byte-reproducible");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    RunOptions o;
    o.experiment = experiment;
    o.config = Config::load(config_path);
    o.seed = seed;
    o.out_dir = out_dir;
    o.timestamp = !no_timestamp;
    const RunResult r = run_experiment(o);
    std::cout << experiment << ": " << (r.pass ? "pass" : "tolerance failure") << '\n';
    return r.pass ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace curvex
