#include "curvex/mu_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "curvex/quadrature.hpp"
#include "curvex/rigidity.hpp"

namespace curvex {

namespace {

constexpr double kScaleSpan = 16.0;

double sn(double K, double r) {
  if (K > 0) return std::sin(std::sqrt(K) * r) / std::sqrt(K);
  if (K < 0) return std::sinh(std::sqrt(-K) * r) / std::sqrt(-K);
  return r;
}

double xlogx2(double f) {
  const double f2 = f * f;
  return f2 > 0.0 ? f2 * std::log(f2) : 0.0;
}

// Composite Gauss-Legendre on [0, R] with the space-form area weight folded in.
struct RadialQuad {
  std::vector<double> r, w;
};

RadialQuad radial_quadrature(const RadialDomain& dom, double t) {
  const double width = std::min(0.5 * std::sqrt(t), dom.R / 8.0);
  const int panels = static_cast<int>(std::ceil(dom.R / width));
  const double area = dom.n * quad::unit_ball_volume(dom.n);
  const auto gl = quad::gauss_legendre(16, 0.0, 1.0);
  RadialQuad q;
  const double h = dom.R / panels;
  for (int p = 0; p < panels; ++p)
    for (size_t i = 0; i < gl.nodes.size(); ++i) {
      const double r = (p + gl.nodes[i]) * h;
      q.r.push_back(r);
      q.w.push_back(gl.weights[i] * h * area * std::pow(sn(dom.K, r), dom.n - 1));
    }
  return q;
}

// Basis (1 − r²/R²) e^{−x/2} L_k^{(n/2−1)}(x) / ‖·‖, x = r²/s2, and its r-derivative.
void basis_row(const RadialDomain& dom, double s2, int N, double r, double* v, double* d) {
  const double a = 0.5 * dom.n - 1.0;
  const double x = r * r / s2;
  const double dxdr = 2.0 * r / s2;
  const double bc = 1.0 - r * r / (dom.R * dom.R);
  const double dbc = -2.0 * r / (dom.R * dom.R);
  const double g = std::exp(-0.5 * x);
  double lm1 = 0.0, l = 1.0;
  for (int k = 0; k < N; ++k) {
    // x L_k' = k L_k − (k + a) L_{k−1}
    const double lp = (k == 0 || x == 0.0) ? 0.0 : (k * l - (k + a) * lm1) / x;
    const double norm = std::exp(0.5 * (std::lgamma(k + a + 1.0) - std::lgamma(k + 1.0)));
    v[k] = bc * g * l / norm;
    d[k] = (dbc * g * l + bc * g * (-0.5 * l + lp) * dxdr) / norm;
    const double next = ((2.0 * k + 1.0 + a - x) * l - (k + a) * lm1) / (k + 1.0);
    lm1 = l;
    l = next;
  }
}

double basis_scale(const RadialDomain& dom, double t) {
  return std::min(4.0 * t, dom.R * dom.R / kScaleSpan);
}

struct Problem {
  const RadialDomain& dom;
  double t;
  double s2;
  int N;
  RadialQuad q;
  Eigen::MatrixXd Phi;   // values of the orthonormal basis at the nodes
  Eigen::MatrixXd T;     // orthonormal coefficients → raw coefficients
  Eigen::MatrixXd K;     // 4t ∫ φ' φ' dμ
  Eigen::MatrixXd Pinv;  // preconditioner inverse
  double constant;

  Problem(const RadialDomain& d, double time, double scale, int size)
      : dom(d), t(time), s2(scale), N(size), q(radial_quadrature(d, time)) {
    const auto Q = static_cast<Eigen::Index>(q.r.size());
    Eigen::MatrixXd B(Q, N), D(Q, N);
    std::vector<double> v(static_cast<size_t>(N)), dv(static_cast<size_t>(N));
    for (Eigen::Index i = 0; i < Q; ++i) {
      basis_row(dom, s2, N, q.r[static_cast<size_t>(i)], v.data(), dv.data());
      for (int k = 0; k < N; ++k) {
        B(i, k) = v[static_cast<size_t>(k)];
        D(i, k) = dv[static_cast<size_t>(k)];
      }
    }
    const Eigen::Map<const Eigen::VectorXd> w(q.w.data(), Q);
    const Eigen::MatrixXd G = B.transpose() * w.asDiagonal() * B;
    // drop directions the ball cannot resolve
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const Eigen::VectorXd& ev = es.eigenvalues();
    Eigen::Index keep = 0;
    while (keep < N && ev(N - 1 - keep) > 1e-12 * ev(N - 1)) ++keep;
    T = es.eigenvectors().rightCols(keep) * ev.tail(keep).cwiseInverse().cwiseSqrt().asDiagonal();
    N = static_cast<int>(keep);
    Phi = B * T;
    const Eigen::MatrixXd Dp = D * T;
    K = 4.0 * t * Dp.transpose() * w.asDiagonal() * Dp;
    Eigen::VectorXd x(Q);
    for (Eigen::Index i = 0; i < Q; ++i) x(i) = q.r[static_cast<size_t>(i)] * q.r[static_cast<size_t>(i)] / s2;
    const Eigen::MatrixXd X = Phi.transpose() * (w.cwiseProduct(x)).asDiagonal() * Phi;
    Pinv = (K + X + Eigen::MatrixXd::Identity(N, N)).inverse();
    const double sc = dom.n * (dom.n - 1) * dom.K;
    constant = t * sc - dom.n - 0.5 * dom.n * std::log(4.0 * std::numbers::pi * t);
  }

  // eps > 0 smooths f² log f² into f² log(f² + eps²) for the descent
  double energy(const Eigen::VectorXd& c, Eigen::VectorXd* grad, double eps = 0.0) const {
    const Eigen::VectorXd f = Phi * c;
    double ent = 0.0;
    Eigen::VectorXd dF(f.size());
    const double e2 = eps * eps;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double wi = q.w[static_cast<size_t>(i)];
      const double f2 = f(i) * f(i);
      if (e2 > 0.0) {
        ent += wi * f2 * std::log(f2 + e2);
        dF(i) = wi * 2.0 * f(i) * (std::log(f2 + e2) + f2 / (f2 + e2));
      } else {
        ent += wi * xlogx2(f(i));
        dF(i) = wi * (f2 > 0.0 ? 2.0 * f(i) * (std::log(f2) + 1.0) : 0.0);
      }
    }
    const Eigen::VectorXd Kc = K * c;
    if (grad) *grad = 2.0 * Kc - Phi.transpose() * dF;
    return c.dot(Kc) - ent + constant;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& c, double eps) const {
    const Eigen::VectorXd f = Phi * c;
    const double e2 = eps * eps;
    Eigen::VectorXd d2(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double f2 = f(i) * f(i), s = f2 + e2;
      const double val = s > 0.0 ? 2.0 * std::log(s) + 4.0 * f2 / s + (6.0 * f2 * e2 + 2.0 * f2 * f2) / (s * s) : 0.0;
      d2(i) = q.w[static_cast<size_t>(i)] * val;
    }
    return 2.0 * K - Phi.transpose() * d2.asDiagonal() * Phi;
  }
};

struct Solve {
  Eigen::VectorXd c;
  double mu = 0.0, grad_norm = 0.0;
  int iterations = 0;
  bool monotone = true;
  int negatives = 0;
};

bool has_negative(const Problem& P, const Eigen::VectorXd& c) {
  const Eigen::VectorXd f = P.Phi * c;
  const double scale = f.cwiseAbs().maxCoeff();
  const double sgn = f(0) < 0.0 ? -1.0 : 1.0;
  return (sgn * f).minCoeff() < -1e-10 * scale;
}

Solve descend(const Problem& P, Eigen::VectorXd c, const MuOptions& opts) {
  Solve s;
  c.normalize();
  const double eps = 1e-10 * (P.Phi * c).cwiseAbs().maxCoeff();
  const double noise = 1e-13 * (1.0 + std::abs(P.constant));
  Eigen::VectorXd g;
  double E = P.energy(c, &g, eps);
  double tau = 1.0;
  const int N = P.N;
  for (s.iterations = 0; s.iterations < opts.max_iter; ++s.iterations) {
    const Eigen::VectorXd r = g - c.dot(g) * c;
    const Eigen::VectorXd Pr = P.Pinv * r, Pc = P.Pinv * c;
    s.grad_norm = std::sqrt(std::max(0.0, r.dot(Pr)));
    if (s.grad_norm < opts.grad_tol) break;

    // Newton on the sphere: bordered system for the tangent step
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N + 1, N + 1);
    A.topLeftCorner(N, N) = P.hessian(c, eps) - c.dot(g) * Eigen::MatrixXd::Identity(N, N);
    A.block(0, N, N, 1) = c;
    A.block(N, 0, 1, N) = c.transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + 1);
    rhs.head(N) = -r;
    const Eigen::VectorXd sol = A.fullPivLu().solve(rhs);
    const Eigen::VectorXd dn = sol.head(N);
    if (dn.allFinite() && r.dot(dn) < 0.0 && dn.norm() < 0.5) {
      const Eigen::VectorXd trial = (c + dn).normalized();
      Eigen::VectorXd gt;
      const double Et = P.energy(trial, &gt, eps);
      const Eigen::VectorXd rt = gt - trial.dot(gt) * trial;
      if (Et <= E + noise && rt.dot(P.Pinv * rt) < r.dot(Pr)) {
        if (Et > E) s.monotone = s.monotone && Et - E <= noise;
        c = trial;
        g = gt;
        E = std::min(E, Et);
        if (has_negative(P, c)) ++s.negatives;
        continue;
      }
    }

    const Eigen::VectorXd d = -Pr + (c.dot(Pr) / c.dot(Pc)) * Pc;
    const double slope = r.dot(d);
    if (!(slope < 0.0)) break;
    tau = std::min(2.0 * tau, 1e3);
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, tau *= 0.5) {
      const Eigen::VectorXd trial = (c + tau * d).normalized();
      Eigen::VectorXd gt;
      const double Et = P.energy(trial, &gt, eps);
      if (Et <= E + 1e-4 * tau * slope) {
        c = trial;
        g = gt;
        E = Et;
        accepted = true;
        if (has_negative(P, c)) ++s.negatives;
        break;
      }
    }
    if (!accepted) break;
  }
  if (c.dot(P.Phi.row(0)) < 0.0) c = -c;
  s.c = c;
  s.mu = P.energy(c, nullptr);
  return s;
}

Eigen::VectorXd initial(const Problem& P, MuInit init) {
  Eigen::VectorXd target(P.Phi.rows());
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    const double r = P.q.r[static_cast<size_t>(i)];
    const double g = init == MuInit::Gaussian ? std::exp(-r * r / (8.0 * P.t)) : 1.0;
    target(i) = g * (1.0 - r * r / (P.dom.R * P.dom.R));
  }
  const Eigen::Map<const Eigen::VectorXd> w(P.q.w.data(), target.size());
  return P.Phi.transpose() * w.cwiseProduct(target);
}

}  // namespace

void RadialDomain::validate() const {
  if (n < 2 || n > kMaxDim) throw Error(ErrorKind::InvalidSpec, "dimension out of range");
  if (!(R > 0.0)) throw Error(ErrorKind::InvalidSpec, "ball radius must be positive");
  if (K > 0.0 && R >= std::numbers::pi / std::sqrt(K)) throw Error(ErrorKind::InvalidSpec, "ball exceeds the sphere");
  if (m < 256) throw Error(ErrorKind::InvalidSpec, "at least 256 sample nodes");
}

MuEstimate minimize_W(const RadialDomain& dom, double t, MuInit init, const MuOptions& opts) {
  dom.validate();
  if (!(t > 0.0)) throw Error(ErrorKind::InvalidSpec, "t must be positive");
  if (opts.basis < 2) throw Error(ErrorKind::InvalidSpec, "basis too small");
  const double s2 = basis_scale(dom, t);
  const Problem coarse(dom, t, s2, opts.basis);
  const Solve a = descend(coarse, initial(coarse, init), opts);
  const Problem fine(dom, t, s2, 2 * opts.basis);
  // warm start by L² projection of the coarse minimizer
  const Eigen::Map<const Eigen::VectorXd> wf(fine.q.w.data(), static_cast<Eigen::Index>(fine.q.w.size()));
  const Solve b = descend(fine, fine.Phi.transpose() * wf.asDiagonal() * (coarse.Phi * a.c), opts);

  MuEstimate out;
  out.t = t;
  out.mu = b.mu;
  out.grad_norm = b.grad_norm;
  out.iterations = a.iterations + b.iterations;
  out.mesh_delta = std::abs(b.mu - a.mu);
  out.monotone = a.monotone && b.monotone;
  out.negative_iterates = a.negatives + b.negatives;
  const Eigen::VectorXd f = fine.Phi * b.c;
  double mass = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) mass += fine.q.w[static_cast<size_t>(i)] * f(i) * f(i);
  out.constraint_residual = std::abs(mass - 1.0);
  out.converged = b.grad_norm < opts.grad_tol && out.mesh_delta < opts.mesh_tol;
  const int raw_n = static_cast<int>(fine.T.rows());
  std::vector<double> v(static_cast<size_t>(raw_n)), dv(static_cast<size_t>(raw_n));
  const Eigen::VectorXd craw = fine.T * b.c;
  for (int i = 0; i < dom.m; ++i) {
    const double r = dom.R * i / (dom.m - 1);
    basis_row(dom, s2, raw_n, r, v.data(), dv.data());
    double fr = 0.0;
    for (int k = 0; k < raw_n; ++k) fr += v[static_cast<size_t>(k)] * craw(k);
    out.radii.push_back(r);
    out.minimizer.push_back(std::abs(fr));
  }
  return out;
}

double radial_W(const RadialDomain& dom, double t, const std::vector<double>& radii, const std::vector<double>& f) {
  dom.validate();
  if (radii.size() != f.size() || radii.size() < 4) throw Error(ErrorKind::InvalidSpec, "profile size mismatch");
  const double h = radii[1] - radii[0];
  boost::math::interpolators::cardinal_cubic_b_spline<double> s(f.begin(), f.end(), radii.front(), h);
  const RadialQuad q = radial_quadrature(dom, t);
  double mass = 0.0, dir = 0.0, ent = 0.0;
  for (size_t i = 0; i < q.r.size(); ++i) {
    const double v = s(q.r[i]), d = s.prime(q.r[i]);
    mass += q.w[i] * v * v;
    dir += q.w[i] * d * d;
    ent += q.w[i] * xlogx2(v);
  }
  // normalize: f → f/√mass
  const double sc = dom.n * (dom.n - 1) * dom.K;
  return 4.0 * t * dir / mass - (ent / mass - std::log(mass)) + t * sc - dom.n -
         0.5 * dom.n * std::log(4.0 * std::numbers::pi * t);
}

MuBoundReport mu_bound_report(const std::vector<MuSample>& samples, double gamma, double Q) {
  MuBoundReport rep;
  rep.gamma = gamma;
  rep.Q = Q;
  rep.implied_rm_bound = rm_bound_from_mu(gamma, Q);
  std::vector<MuSample> s = samples;
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  const size_t half = std::max<size_t>(2, (s.size() + 1) / 2);
  if (s.size() < 2 || half > s.size()) throw Error(ErrorKind::IllConditionedFit, "need at least two samples");
  s.resize(half);
  if (s.front().t == s.back().t) throw Error(ErrorKind::IllConditionedFit, "samples share one time");
  double num = 0.0, den = 0.0;
  for (const auto& x : s) {
    num += -x.mu * x.t * x.t;
    den += std::pow(x.t, 4);
  }
  rep.q = num / den;
  double rss = 0.0;
  for (const auto& x : s) rss += std::pow(x.mu + rep.q * x.t * x.t, 2);
  rep.q_stderr = std::sqrt(rss / static_cast<double>(s.size() - 1) / den);
  rep.within = rep.q - rep.q_stderr <= Q;
  return rep;
}

}  // namespace curvex
