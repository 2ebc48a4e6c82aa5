#include "curvex/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "curvex/quadrature.hpp"

namespace curvex {

namespace {

constexpr double kPi = std::numbers::pi;

// Pulled-back geometry at one normal-coordinate point, fixed storage.
struct Geo {
  double density = 1.0;
  double sc = 0.0;
  std::array<double, kMaxDim * kMaxDim> ginv{};
};

void geo_from_sample(const NormalSample& s, int n, Geo& g) {
  g.density = s.density;
  g.sc = s.scalar_curvature;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g.ginv[static_cast<size_t>(i * n + j)] = s.ginv(i, j);
}

void geo_at(const NormalChart& nc, const double* x, Geo& g) {
  const int n = nc.dim();
  switch (nc.method()) {
    case NormalChart::Method::Translation: {
      g.density = 1.0;
      std::array<double, kMaxDim> p{};
      for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = nc.center()[static_cast<size_t>(i)] + x[i];
      g.sc = nc.base().scalar_curvature(std::span<const double>(p.data(), static_cast<size_t>(n)));
      g.ginv.fill(0.0);
      for (int i = 0; i < n; ++i) g.ginv[static_cast<size_t>(i * n + i)] = 1.0;
      return;
    }
    case NormalChart::Method::ClosedFormSpaceForm: {
      const double K = nc.base().model()->K;
      g.sc = n * (n - 1.0) * K;
      double r2 = 0.0;
      for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
      g.ginv.fill(0.0);
      if (r2 == 0.0) {
        g.density = 1.0;
        for (int i = 0; i < n; ++i) g.ginv[static_cast<size_t>(i * n + i)] = 1.0;
        return;
      }
      const double r = std::sqrt(r2);
      const double q = sn_k(K, r) / r;
      g.density = std::pow(q, n - 1);
      const double tang = 1.0 / (q * q);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double radial = x[i] * x[j] / r2;
          g.ginv[static_cast<size_t>(i * n + j)] = radial + tang * ((i == j ? 1.0 : 0.0) - radial);
        }
      return;
    }
    case NormalChart::Method::Shooting: {
      geo_from_sample(nc.sample(std::span<const double>(x, static_cast<size_t>(n))), n, g);
      return;
    }
  }
}

struct Terms {
  double mass = 0.0;
  double d4 = 0.0;   // 4t ∫|∇u|² in the scaled variable
  double ent = 0.0;  // ∫ u² (log η² − |z|²)
  double sc = 0.0;
  bool clamped = false;

  void add(const Terms& o) {
    mass += o.mass;
    d4 += o.d4;
    ent += o.ent;
    sc += o.sc;
    clamped = clamped || o.clamped;
  }
};

void accumulate(const TestFunction& tf, double t, const double* z, double omega, const Geo& g, Terms& acc) {
  const int n = tf.dim();
  const double st = std::sqrt(t);
  std::array<double, kMaxDim> x{}, grad{};
  double z2 = 0.0;
  for (int i = 0; i < n; ++i) {
    x[static_cast<size_t>(i)] = 2.0 * st * z[i];
    z2 += z[i] * z[i];
  }
  bool cl = false;
  const double e2 = tf.eta2(x.data(), t, grad.data(), &cl);
  acc.clamped = acc.clamped || cl;
  if (!(e2 > 0.0)) return;
  double gzz = 0.0, gzd = 0.0, gdd = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double h = g.ginv[static_cast<size_t>(i * n + j)];
      gzz += h * z[i] * z[j];
      gzd += h * z[i] * grad[static_cast<size_t>(j)];
      gdd += h * grad[static_cast<size_t>(i)] * grad[static_cast<size_t>(j)];
    }
  const double wr = omega * g.density;
  const double W = wr * e2;
  acc.mass += W;
  acc.d4 += wr * (e2 * gzz - 2.0 * st * gzd + t * gdd / e2);
  acc.ent += W * (std::log(e2) - z2);
  acc.sc += W * g.sc;
}

constexpr long kBlock = 4096;

// Product Gauss-Hermite: blocks of consecutive multi-indices.
Terms block_product(const TestFunction& tf, double t, const quad::Rule1D& gh, long begin, long end) {
  const int n = tf.dim();
  const int order = static_cast<int>(gh.nodes.size());
  const double norm = std::pow(kPi, -0.5 * n);
  Terms acc;
  std::array<double, kMaxDim> z{}, x{};
  Geo g;
  for (long lin = begin; lin < end; ++lin) {
    long rem = lin;
    double w = norm;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<size_t>(rem % order);
      rem /= order;
      z[static_cast<size_t>(i)] = gh.nodes[k];
      w *= gh.weights[k];
    }
    const double st = 2.0 * std::sqrt(t);
    for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] = st * z[static_cast<size_t>(i)];
    double r2 = 0.0;
    for (int i = 0; i < n; ++i) r2 += x[static_cast<size_t>(i)] * x[static_cast<size_t>(i)];
    if (r2 >= tf.support_radius * tf.support_radius) continue;
    geo_at(*tf.nchart, x.data(), g);
    accumulate(tf, t, z.data(), w, g, acc);
  }
  return acc;
}

// Radial x sphere: one block per direction.
Terms block_ray(const TestFunction& tf, double t, const quad::Rule1D& radial, const quad::SphereRule& sph,
                size_t k) {
  const int n = tf.dim();
  const double norm = std::pow(kPi, -0.5 * n);
  const double* dir = sph.direction(k);
  const double st = 2.0 * std::sqrt(t);
  Terms acc;
  std::array<double, kMaxDim> z{}, x{};
  Geo g;
  const bool shoot = tf.nchart->method() == NormalChart::Method::Shooting;
  std::vector<NormalSample> ray;
  if (shoot) {
    std::vector<double> radii(radial.nodes.size());
    for (size_t j = 0; j < radii.size(); ++j) radii[j] = st * radial.nodes[j];
    ray = tf.nchart->sample_ray(std::span<const double>(dir, static_cast<size_t>(n)), radii);
  }
  for (size_t j = 0; j < radial.nodes.size(); ++j) {
    const double s = radial.nodes[j];
    for (int i = 0; i < n; ++i) {
      z[static_cast<size_t>(i)] = s * dir[i];
      x[static_cast<size_t>(i)] = st * z[static_cast<size_t>(i)];
    }
    const double w = norm * sph.weights[k] * radial.weights[j] * std::pow(s, n - 1) * std::exp(-s * s);
    if (shoot)
      geo_from_sample(ray[j], n, g);
    else
      geo_at(*tf.nchart, x.data(), g);
    accumulate(tf, t, z.data(), w, g, acc);
  }
  return acc;
}

struct RunResult {
  Terms total;
  double l_stderr = 0.0;  // Monte Carlo only
  std::size_t nodes = 0;
};

RunResult run_rule(const TestFunction& tf, double t, const QuadratureSpec& q, int order, int resolution,
                   ExecPolicy policy) {
  const int n = tf.dim();
  RunResult rr;
  std::vector<Terms> blocks;
  if (q.rule == QuadRule::ProductHermite) {
    const quad::Rule1D gh = quad::gauss_hermite(order);
    long total = 1;
    for (int i = 0; i < n; ++i) total *= order;
    const long nb = (total + kBlock - 1) / kBlock;
    blocks.resize(static_cast<size_t>(nb));
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic, 4)
      for (long b = 0; b < nb; ++b)
        blocks[static_cast<size_t>(b)] = block_product(tf, t, gh, b * kBlock, std::min(total, (b + 1) * kBlock));
    } else {
      for (long b = 0; b < nb; ++b)
        blocks[static_cast<size_t>(b)] = block_product(tf, t, gh, b * kBlock, std::min(total, (b + 1) * kBlock));
    }
    rr.nodes = static_cast<std::size_t>(total);
    for (const auto& b : blocks) rr.total.add(b);
    return rr;
  }

  const double zmax = std::min(q.c_trunc, tf.support_radius / (2.0 * std::sqrt(t)));
  const quad::Rule1D radial = quad::gauss_legendre(order, 0.0, zmax);
  const quad::SphereRule sph = quad::sphere_rule(n, resolution, q.seed, q.mc_samples);
  const long nd = static_cast<long>(sph.size());
  blocks.resize(sph.size());
  if (policy == ExecPolicy::Parallel) {
    // exceptions cannot cross the parallel region
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1)
    for (long k = 0; k < nd; ++k) {
      try {
        blocks[static_cast<size_t>(k)] = block_ray(tf, t, radial, sph, static_cast<size_t>(k));
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
  } else {
    for (long k = 0; k < nd; ++k) blocks[static_cast<size_t>(k)] = block_ray(tf, t, radial, sph, static_cast<size_t>(k));
  }
  rr.nodes = sph.size() * radial.nodes.size();
  for (const auto& b : blocks) rr.total.add(b);
  if (sph.monte_carlo && nd > 1) {
    const double M = rr.total.mass;
    const double dm = M > 0 ? std::log(M) + 1.0 - n : 0.0;
    double mean = 0.0;
    for (const auto& b : blocks) mean += b.d4 - b.ent + dm * b.mass;
    mean /= static_cast<double>(nd);
    double var = 0.0;
    for (const auto& b : blocks) {
      const double d = b.d4 - b.ent + dm * b.mass - mean;
      var += d * d;
    }
    var /= static_cast<double>(nd - 1);
    rr.l_stderr = std::sqrt(var * static_cast<double>(nd));
  }
  return rr;
}

FunctionalValue finish(const TestFunction& tf, double t, const Terms& s) {
  const int n = tf.dim();
  FunctionalValue v;
  const double M = s.mass;
  v.components.mass = M;
  v.components.dirichlet = s.d4 / (4.0 * t);
  v.components.entropy = s.ent - 0.5 * n * std::log(4.0 * kPi * t) * M;
  v.components.scalar_curvature_term = s.sc;
  v.value = s.d4 - s.ent + (M > 0 ? M * std::log(M) : 0.0) - n * M;
  v.clamped = s.clamped;
  return v;
}

double value_of(const Terms& s, int n) {
  const double M = s.mass;
  return s.d4 - s.ent + (M > 0 ? M * std::log(M) : 0.0) - n * M;
}

FunctionalValue evaluate(const TestFunction& tf, double t, const QuadratureSpec& q, ExecPolicy policy,
                         bool with_scalar) {
  q.validate();
  if (!(t > 0.0)) throw Error(ErrorKind::InvalidSpec, "t must be positive");
  const int n = tf.dim();
  const double z0 = tf.support_radius / (4.0 * std::sqrt(t));
  const double tail = cutoff_tail_bound(n, z0);
  if (tail > q.target_tol)
    throw Error(ErrorKind::TimeTooLarge, "cutoff tail bound " + std::to_string(tail) + " exceeds tolerance");

  const RunResult full = run_rule(tf, t, q, q.order, q.sphere_resolution, policy);
  const int reduced_order = std::max(10, (3 * q.order) / 4);
  const int reduced_res = std::max(2, (3 * q.sphere_resolution) / 4);
  const bool mc = q.rule == QuadRule::RadialSphere && n >= 5;
  const RunResult coarse = run_rule(tf, t, q, reduced_order, mc ? q.sphere_resolution : reduced_res, policy);

  FunctionalValue v = finish(tf, t, full.total);
  v.nodes = full.nodes;
  double diff = std::abs(value_of(full.total, n) - value_of(coarse.total, n));
  if (with_scalar) diff += t * std::abs(full.total.sc - coarse.total.sc);
  diff = std::max(diff, std::abs(full.total.mass - coarse.total.mass));
  v.quad_error_estimate = std::max(diff, full.l_stderr);
  if (!mc && diff > q.target_tol * std::max(1.0, std::abs(full.total.mass)))
    throw Error(ErrorKind::QuadratureNotConverged,
                "reduced-order difference " + std::to_string(diff) + " exceeds tolerance");
  if (with_scalar) v.value += t * v.components.scalar_curvature_term;
  return v;
}

double gl_integral(const std::function<double(double)>& f, double a, double b, int order) {
  const quad::Rule1D r = quad::gauss_legendre(order, a, b);
  double s = 0.0;
  for (size_t j = 0; j < r.nodes.size(); ++j) s += r.weights[j] * f(r.nodes[j]);
  return s;
}

}  // namespace

void QuadratureSpec::validate() const {
  if (order < 10) throw Error(ErrorKind::InvalidSpec, "quadrature order must be at least 10");
  if (c_trunc < 8.0) throw Error(ErrorKind::InvalidSpec, "truncation factor must be at least 8");
  if (!(target_tol > 0.0)) throw Error(ErrorKind::InvalidSpec, "target tolerance must be positive");
  if (sphere_resolution < 2) throw Error(ErrorKind::InvalidSpec, "sphere resolution must be at least 2");
  if (mc_samples < 2) throw Error(ErrorKind::InvalidSpec, "Monte Carlo sample count must be at least 2");
}

double cutoff_profile(double s) {
  if (s <= 0.5) return 1.0;
  if (s >= 1.0) return 0.0;
  const double u = 2.0 * s - 1.0;
  return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

double cutoff_derivative(double s) {
  if (s <= 0.5 || s >= 1.0) return 0.0;
  const double u = 2.0 * s - 1.0;
  return -60.0 * u * u * (1.0 - u) * (1.0 - u);
}

double TestFunction::eta2(const double* x, double t, double* grad, bool* clamped) const {
  const int n = dim();
  double r2 = 0.0, axx = 0.0;
  std::array<double, kMaxDim> ax{};
  for (int i = 0; i < n; ++i) {
    r2 += x[i] * x[i];
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += a(i, j) * x[j];
    ax[static_cast<size_t>(i)] = s;
    axx += s * x[i];
  }
  const double r = std::sqrt(r2);
  const double s = r / support_radius;
  const double c = cutoff_profile(s);
  double P = 1.0 + axx + alpha * t;
  bool cl = false;
  if (P < kFloor) {
    P = kFloor;
    cl = true;
  }
  if (clamped) *clamped = cl && c > 0.0;
  const double amp2 = amplitude * amplitude;
  if (grad) {
    const double dc = r > 0.0 ? cutoff_derivative(s) / (support_radius * r) : 0.0;
    for (int i = 0; i < n; ++i)
      grad[i] = amp2 * (dc * x[i] * P + (cl ? 0.0 : 2.0 * c * ax[static_cast<size_t>(i)]));
  }
  return amp2 * c * P;
}

TestFunction build_test_function(std::shared_ptr<const NormalChart> nchart, AMode mode,
                                 const std::optional<Sym2>& a_custom, double alpha, double r_s) {
  const int n = nchart->dim();
  if (!(r_s > 0.0)) throw Error(ErrorKind::InvalidSpec, "support radius must be positive");
  if (r_s > nchart->radius()) throw Error(ErrorKind::SupportTooLarge, "support radius exceeds the normal chart");
  TestFunction tf;
  tf.nchart = nchart;
  tf.alpha = alpha;
  tf.support_radius = r_s;
  if (mode == AMode::Optimal) {
    const CurvatureData c = curvature_at(nchart->base(), nchart->center());
    tf.a = (1.0 / 3.0) * c.rc;
  } else {
    if (!a_custom) throw Error(ErrorKind::InvalidSpec, "custom mode needs a");
    if (a_custom->dim() != n) throw Error(ErrorKind::DimensionMismatch, "a has the wrong dimension");
    tf.a = *a_custom;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tf.a.matrix(), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  tf.positivity_violated = 1.0 + std::min(0.0, lmin) * r_s * r_s <= TestFunction::kFloor;
  return tf;
}

double cutoff_tail_bound(int n, double z0) {
  if (z0 <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * n, z0 * z0) * (1.0 + z0 * z0);
}

double reconstruct_L(const FunctionalComponents& c, int n, double t) {
  const double M = c.mass;
  return 4.0 * t * c.dirichlet - c.entropy + (M > 0 ? M * std::log(M) : 0.0) -
         (n + 0.5 * n * std::log(4.0 * kPi * t)) * M;
}

FunctionalValue eval_L(const TestFunction& tf, double t, const QuadratureSpec& q, ExecPolicy policy) {
  return evaluate(tf, t, q, policy, false);
}

FunctionalValue eval_W(const TestFunction& tf, double t, const QuadratureSpec& q, ExecPolicy policy) {
  return evaluate(tf, t, q, policy, true);
}

double entropy_integral(const TestFunction& tf, double t, const QuadratureSpec& q) {
  return eval_L(tf, t, q).components.entropy;
}

double model_ball_volume(int n, double K, double r) {
  if (r <= 0.0) return 0.0;
  const double c = n * quad::unit_ball_volume(n);
  return c * gl_integral([&](double s) { return std::pow(sn_k(K, s), n - 1); }, 0.0, r, 48);
}

double model_sphere_area(int n, double K, double r) {
  return n * quad::unit_ball_volume(n) * std::pow(sn_k(K, r), n - 1);
}

double ball_volume(const NormalChart& nchart, double r, const QuadratureSpec& q) {
  q.validate();
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidSpec, "ball radius must be positive");
  if (r > nchart.radius()) throw Error(ErrorKind::SupportTooLarge, "ball radius exceeds the normal chart");
  const int n = nchart.dim();
  auto run = [&](int order, int res) {
    const quad::Rule1D radial = quad::gauss_legendre(order, 0.0, r);
    const quad::SphereRule sph = quad::sphere_rule(n, res, q.seed, q.mc_samples);
    std::vector<double> per(sph.size());
    std::vector<double> radii = radial.nodes;
    const long nd = static_cast<long>(sph.size());
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1)
    for (long k = 0; k < nd; ++k) {
      try {
        const double* dir = sph.direction(static_cast<size_t>(k));
        double s = 0.0;
        if (nchart.method() == NormalChart::Method::Shooting) {
          const auto ray = nchart.sample_ray(std::span<const double>(dir, static_cast<size_t>(n)), radii);
          for (size_t j = 0; j < radii.size(); ++j)
            s += radial.weights[j] * ray[j].density * std::pow(radii[j], n - 1);
        } else {
          std::array<double, kMaxDim> x{};
          Geo g;
          for (size_t j = 0; j < radii.size(); ++j) {
            for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] = radii[j] * dir[i];
            geo_at(nchart, x.data(), g);
            s += radial.weights[j] * g.density * std::pow(radii[j], n - 1);
          }
        }
        per[static_cast<size_t>(k)] = sph.weights[static_cast<size_t>(k)] * s;
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    double total = 0.0;
    for (double v : per) total += v;
    return total;
  };
  const double full = run(q.order, q.sphere_resolution);
  const bool mc = n >= 5;
  const double coarse = run(std::max(10, (3 * q.order) / 4), mc ? q.sphere_resolution : std::max(2, (3 * q.sphere_resolution) / 4));
  if (!mc && std::abs(full - coarse) > q.target_tol * full)
    throw Error(ErrorKind::QuadratureNotConverged, "ball volume quadrature did not settle");
  return full;
}

std::vector<double> bishop_gromov_ratio(const NormalChart& nchart, double K, std::span<const double> radii,
                                        const QuadratureSpec& q) {
  std::vector<double> out;
  out.reserve(radii.size());
  for (double r : radii) out.push_back(ball_volume(nchart, r, q) / model_ball_volume(nchart.dim(), K, r));
  return out;
}

}  // namespace curvex
