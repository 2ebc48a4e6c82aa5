#include "curvex/isoperimetry.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>

#include <boost/math/interpolators/barycentric_rational.hpp>
#include <boost/math/tools/roots.hpp>

#include "curvex/quadrature.hpp"

namespace curvex {

namespace {

constexpr int kScan = 600;

template <class F>
void parallel_for(size_t count, F&& body) {
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < static_cast<long>(count); ++k) {
    try {
      body(static_cast<size_t>(k));
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

double root_in(const std::function<double(double)>& f, double lo, double hi) {
  boost::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(52);
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
  return 0.5 * (a + b);
}

double u_value(const TestFunction& tf, double t, const double* x, double* grad) {
  const int n = tf.dim();
  double r2 = 0.0;
  for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
  double g[kMaxDim];
  const double e = tf.eta2(x, t, grad ? g : nullptr);
  if (e <= 0.0) {
    if (grad) std::fill(grad, grad + n, 0.0);
    return 0.0;
  }
  const double u = std::pow(4.0 * std::numbers::pi * t, -0.25 * n) * std::exp(-r2 / (8.0 * t)) * std::sqrt(e);
  if (grad)
    for (int i = 0; i < n; ++i) grad[i] = u * (-x[i] / (4.0 * t) + g[i] / (2.0 * e));
  return u;
}

// u scanned along the rays of a sphere rule, with cumulative ray volumes.
struct RayField {
  const TestFunction& tf;
  double t;
  quad::SphereRule rule;
  std::vector<double> radii;
  std::vector<double> u;    // dir-major
  std::vector<double> cum;  // ∫_0^{r_i} density r^{n-1} dr
  bool flat;

  RayField(const TestFunction& f, double time, const QuadratureSpec& q)
      : tf(f), t(time), rule(quad::sphere_rule(f.dim(), q.sphere_resolution, q.seed, q.mc_samples)) {
    const int n = tf.dim();
    flat = tf.nchart->method() == NormalChart::Method::Translation;
    const double rmax = std::min(tf.support_radius, tf.nchart->radius());
    for (int i = 0; i < kScan; ++i) radii.push_back(rmax * i / (kScan - 1));
    const size_t nd = rule.size();
    u.assign(nd * kScan, 0.0);
    cum.assign(nd * kScan, 0.0);
    const auto gl = quad::gauss_legendre(8, 0.0, 1.0);
    parallel_for(nd, [&](size_t k) {
      const double* dir = rule.direction(k);
      double x[kMaxDim];
      for (int i = 0; i < kScan; ++i) {
        for (int j = 0; j < n; ++j) x[j] = radii[static_cast<size_t>(i)] * dir[j];
        u[k * kScan + i] = u_value(tf, t, x, nullptr);
      }
      double* c = &cum[k * kScan];
      if (flat) {
        for (int i = 0; i < kScan; ++i) c[i] = std::pow(radii[static_cast<size_t>(i)], n) / n;
        return;
      }
      std::vector<double> pts;
      for (int i = 0; i + 1 < kScan; ++i)
        for (double z : gl.nodes) pts.push_back(radii[static_cast<size_t>(i)] + z * (radii[1] - radii[0]));
      const auto samples = tf.nchart->sample_ray(std::span<const double>(dir, static_cast<size_t>(n)), pts);
      size_t p = 0;
      for (int i = 0; i + 1 < kScan; ++i) {
        double s = 0.0;
        for (size_t m = 0; m < gl.nodes.size(); ++m, ++p)
          s += gl.weights[m] * samples[p].density * std::pow(pts[p], n - 1);
        c[i + 1] = c[i] + s * (radii[1] - radii[0]);
      }
    });
  }

  double along(size_t k, double r) const {
    const int n = tf.dim();
    const double* dir = rule.direction(k);
    double x[kMaxDim];
    for (int j = 0; j < n; ++j) x[j] = r * dir[j];
    return u_value(tf, t, x, nullptr);
  }

  double volume_to(size_t k, int cell, double r) const {
    const int n = tf.dim();
    const double r0 = radii[static_cast<size_t>(cell)];
    const double base = cum[k * kScan + static_cast<size_t>(cell)];
    if (flat) return std::pow(r, n) / n;
    const auto gl = quad::gauss_legendre(8, r0, r);
    const double* dir = rule.direction(k);
    const auto samples = tf.nchart->sample_ray(std::span<const double>(dir, static_cast<size_t>(n)), gl.nodes);
    double s = 0.0;
    for (size_t m = 0; m < gl.nodes.size(); ++m) s += gl.weights[m] * samples[m].density * std::pow(gl.nodes[m], n - 1);
    return base + s;
  }

  struct Crossing {
    int cell;
    double r;
  };

  std::vector<Crossing> crossings(size_t k, double s) const {
    std::vector<Crossing> out;
    const double* uk = &u[k * kScan];
    for (int i = 0; i + 1 < kScan; ++i) {
      const double a = uk[i] - s, b = uk[i + 1] - s;
      if ((a >= 0.0) == (b >= 0.0)) continue;
      const double r = root_in([&](double x) { return along(k, x) - s; }, radii[static_cast<size_t>(i)],
                               radii[static_cast<size_t>(i) + 1]);
      out.push_back({i, r});
    }
    return out;
  }

  double ray_volume(size_t k, double s) const {
    double v = 0.0, start_vol = 0.0;
    bool inside = u[k * kScan] >= s;
    for (const auto& c : crossings(k, s)) {
      const double vc = volume_to(k, c.cell, c.r);
      if (inside) v += vc - start_vol;
      else start_vol = vc;
      inside = !inside;
    }
    if (inside) throw Error(ErrorKind::LevelSetDegenerate, "superlevel set reaches the support boundary");
    return v;
  }

  double volume(double s) const {
    std::vector<double> per(rule.size());
    parallel_for(rule.size(), [&](size_t k) { per[k] = rule.weights[k] * ray_volume(k, s); });
    double v = 0.0;
    for (double x : per) v += x;
    return v;
  }

  double top() const { return *std::max_element(u.begin(), u.end()); }
};

double sn(double K, double r) {
  if (K > 0) return std::sin(std::sqrt(K) * r) / std::sqrt(K);
  if (K < 0) return std::sinh(std::sqrt(-K) * r) / std::sqrt(-K);
  return r;
}

}  // namespace

double space_form_total_volume(int n, double K) {
  if (K <= 0.0) return std::numeric_limits<double>::infinity();
  return model_ball_volume(n, K, std::numbers::pi / std::sqrt(K));
}

double space_form_radius(int n, double K, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorKind::NonPositiveVolume, "volume must be positive");
  if (K == 0.0) return std::pow(beta / quad::unit_ball_volume(n), 1.0 / n);
  double hi;
  if (K > 0.0) {
    if (beta >= space_form_total_volume(n, K) * (1.0 - 1e-13)) throw Error(ErrorKind::VolumeTooLarge, "volume exceeds the sphere");
    hi = std::numbers::pi / std::sqrt(K);
  } else {
    hi = std::pow(beta / quad::unit_ball_volume(n), 1.0 / n);
    while (model_ball_volume(n, K, hi) < beta) hi *= 2.0;
  }
  auto f = [&](double r) { return std::make_pair(model_ball_volume(n, K, r) - beta, model_sphere_area(n, K, r)); };
  const double guess = std::min(std::pow(beta / quad::unit_ball_volume(n), 1.0 / n), 0.5 * hi);
  return boost::math::tools::newton_raphson_iterate(f, guess, 0.0, hi, 50);
}

double iso_profile(int n, double K, double beta) {
  return model_sphere_area(n, K, space_form_radius(n, K, beta));
}

double geodesic_sphere_area(const NormalChart& nchart, double r, const QuadratureSpec& q) {
  const int n = nchart.dim();
  const auto rule = quad::sphere_rule(n, q.sphere_resolution, q.seed, q.mc_samples);
  std::vector<double> per(rule.size());
  parallel_for(rule.size(), [&](size_t k) {
    const double* d = rule.direction(k);
    std::vector<double> x(d, d + n);
    for (double& v : x) v *= r;
    per[k] = rule.weights[k] * nchart.density(x);
  });
  double s = 0.0;
  for (double v : per) s += v;
  return s * std::pow(r, n - 1);
}

double geodesic_ball_radius(const NormalChart& nchart, double beta, const QuadratureSpec& q) {
  if (!(beta > 0.0)) throw Error(ErrorKind::NonPositiveVolume, "ball volume must be positive");
  const int n = nchart.dim();
  double r = std::pow(beta / quad::unit_ball_volume(n), 1.0 / n);
  for (int it = 0; it < 50; ++it) {
    if (r > nchart.radius()) throw Error(ErrorKind::SupportTooLarge, "probe ball leaves the normal chart");
    const double step = (ball_volume(nchart, r, q) - beta) / geodesic_sphere_area(nchart, r, q);
    r -= step;
    if (std::abs(step) < 1e-14 * r) return r;
  }
  throw Error(ErrorKind::NotConverged, "ball radius iteration");
}

struct RadialProfile::Interp {
  boost::math::barycentric_rational<double> f;
};

RadialProfile::RadialProfile(int n, double K, double t, std::vector<double> radii, std::vector<double> values)
    : n_(n), K_(K), t_(t), radii_(std::move(radii)), values_(std::move(values)) {
  if (radii_.size() != values_.size() || radii_.size() < 8)
    throw Error(ErrorKind::InvalidSpec, "radial profile needs matching samples");
  std::vector<double> x, y;
  for (size_t i = 0; i < radii_.size(); ++i) {
    if (i > 0 && !(radii_[i] > radii_[i - 1])) throw Error(ErrorKind::InvalidSpec, "radii must increase");
    if (i > 0 && values_[i] > values_[i - 1]) throw Error(ErrorKind::InvalidSpec, "profile must not increase");
    const double r2 = radii_[i] * radii_[i];
    x.push_back(r2);
    y.push_back(std::log(values_[i]) + r2 / (8.0 * t_));
  }
  interp_ = std::make_shared<const Interp>(Interp{boost::math::barycentric_rational<double>(std::move(x), std::move(y), 5)});
}

double RadialProfile::log_value(double r2) const { return interp_->f(r2) - r2 / (8.0 * t_); }
double RadialProfile::log_slope(double r2) const { return interp_->f.prime(r2) - 1.0 / (8.0 * t_); }

double RadialProfile::value(double r) const {
  if (r > radii_.back()) return 0.0;
  return std::exp(log_value(r * r));
}

double RadialProfile::derivative(double r) const {
  if (r > radii_.back()) return 0.0;
  return value(r) * log_slope(r * r) * 2.0 * r;
}

double RadialProfile::radius_of_level(double s) const {
  if (!(s <= values_.front() && s >= values_.back())) throw Error(ErrorKind::InvalidSpec, "level outside the profile");
  if (s == values_.front()) return radii_.front();
  const double ls = std::log(s);
  auto it = std::lower_bound(values_.begin(), values_.end(), s, std::greater<>());
  const size_t i = static_cast<size_t>(it - values_.begin());
  if (values_[i] == s) return radii_[i];
  return std::sqrt(root_in([&](double r2) { return log_value(r2) - ls; }, radii_[i - 1] * radii_[i - 1],
                           radii_[i] * radii_[i]));
}

FunctionalComponents RadialProfile::components() const {
  FunctionalComponents c;
  const auto gl = quad::gauss_legendre(8, 0.0, 1.0);
  for (size_t i = 0; i + 1 < radii_.size(); ++i) {
    const double a = radii_[i], h = radii_[i + 1] - a;
    for (size_t m = 0; m < gl.nodes.size(); ++m) {
      const double r = a + gl.nodes[m] * h;
      const double w = gl.weights[m] * h * n_ * quad::unit_ball_volume(n_) * std::pow(sn(K_, r), n_ - 1);
      const double lv = log_value(r * r);
      const double v2 = std::exp(2.0 * lv);
      const double d = 2.0 * r * log_slope(r * r);
      c.mass += w * v2;
      c.entropy += w * v2 * 2.0 * lv;
      c.dirichlet += w * v2 * d * d;
    }
  }
  return c;
}

double peak_value(const TestFunction& tf, double t) {
  const double x[kMaxDim] = {};
  return u_value(tf, t, x, nullptr);
}

double superlevel_volume(const TestFunction& tf, double t, double s, const QuadratureSpec& q) {
  return RayField(tf, t, q).volume(s);
}

SymmetrizeResult symmetrize(const TestFunction& tf, double t, double K, int levels, const QuadratureSpec& q) {
  if (levels < 64) throw Error(ErrorKind::InvalidSpec, "symmetrization needs at least 64 levels");
  const RayField field(tf, t, q);
  const int n = tf.dim();
  const double top = std::max(field.top(), peak_value(tf, t));
  const double s0 = top * (1.0 - 1e-3);
  const double ratio = std::pow(1e-6 / (1.0 - 1e-3), 1.0 / (levels - 1));
  std::vector<double> lv, vol;
  for (int k = 0; k < levels; ++k) {
    lv.push_back(s0 * std::pow(ratio, k));
    vol.push_back(field.volume(lv.back()));
    if (k > 0 && !(vol[static_cast<size_t>(k)] > vol[static_cast<size_t>(k) - 1]))
      throw Error(ErrorKind::LevelSetDegenerate, "superlevel volumes are not increasing");
  }
  std::vector<int> degenerate;
  for (int k = 1; k + 2 < levels; ++k) {
    const auto i = static_cast<size_t>(k);
    const double d = vol[i + 1] - vol[i];
    const double nb = 0.5 * ((vol[i] - vol[i - 1]) + (vol[i + 2] - vol[i + 1]));
    if (d > 10.0 * nb) degenerate.push_back(k);
  }
  std::vector<double> radii{0.0}, values{top};
  for (size_t k = 0; k < lv.size(); ++k) {
    radii.push_back(space_form_radius(n, K, vol[k]));
    values.push_back(lv[k]);
  }
  return {RadialProfile(n, K, t, std::move(radii), std::move(values)), std::move(lv), std::move(vol),
          std::move(degenerate)};
}

DirichletComparison polya_szego_check(const TestFunction& tf, double t, double K, const QuadratureSpec& q,
                                      int levels) {
  const auto sym = symmetrize(tf, t, K, levels, q);
  DirichletComparison d;
  d.lhs = sym.profile.components().dirichlet;
  d.rhs = eval_L(tf, t, q).components.dirichlet;
  return d;
}

HolderStep holder_step_check(const TestFunction& tf, double t, double s, const QuadratureSpec& q) {
  const RayField field(tf, t, q);
  const int n = tf.dim();
  const double top = std::max(field.top(), peak_value(tf, t));
  const double h = 1e-3 * s;
  if (!(s > 0.0) || s + 2.0 * h >= top) throw Error(ErrorKind::InvalidSpec, "level outside the range of u");
  const size_t nd = field.rule.size();
  std::vector<double> area(nd), inv(nd), grad(nd);
  std::vector<int> bad(nd, 0);
  parallel_for(nd, [&](size_t k) {
    const double* dir = field.rule.direction(k);
    for (const auto& c : field.crossings(k, s)) {
      double x[kMaxDim], g[kMaxDim];
      for (int j = 0; j < n; ++j) x[j] = c.r * dir[j];
      u_value(tf, t, x, g);
      double dr = 0.0;
      for (int j = 0; j < n; ++j) dr += g[j] * dir[j];
      double density = 1.0, g2 = 0.0;
      if (field.flat) {
        for (int j = 0; j < n; ++j) g2 += g[j] * g[j];
      } else {
        const NormalSample smp = tf.nchart->sample(std::span<const double>(x, static_cast<size_t>(n)));
        density = smp.density;
        const Eigen::Map<const Eigen::VectorXd> gv(g, n);
        g2 = gv.dot(smp.ginv * gv);
      }
      const double gn = std::sqrt(g2);
      if (gn * std::sqrt(t) < 1e-6 * s || std::abs(dr) < 1e-12 * gn) {
        bad[k] = 1;
        continue;
      }
      const double base = field.rule.weights[k] * density * std::pow(c.r, n - 1) / std::abs(dr);
      inv[k] += base;
      area[k] += base * gn;
      grad[k] += base * g2;
    }
  });
  if (std::any_of(bad.begin(), bad.end(), [](int b) { return b != 0; }))
    throw Error(ErrorKind::LevelSetDegenerate, "gradient vanishes on the level set");
  HolderStep out;
  double a = 0.0, gi = 0.0;
  for (size_t k = 0; k < nd; ++k) {
    a += area[k];
    gi += grad[k];
    out.inv_grad += inv[k];
  }
  out.area_sq = a * a;
  out.product = gi * out.inv_grad;
  out.volume_slope = -(-field.volume(s + 2 * h) + 8 * field.volume(s + h) - 8 * field.volume(s - h) +
                       field.volume(s - 2 * h)) /
                     (12 * h);
  return out;
}

}  // namespace curvex
