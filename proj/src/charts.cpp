#include "curvex/charts.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <boost/numeric/odeint.hpp>

namespace curvex {

namespace {

constexpr double kPi = std::numbers::pi;

// Jacobian of metric jets -> Christoffels of the first and second kind.
struct MetricJets {
  int n;
  std::array<Jet2, kMaxDim * kMaxDim> g;
  const Jet2& at(int i, int j) const { return g[static_cast<size_t>(i * n + j)]; }
};

MetricJets eval_jets(const MetricJetFn& fn, int n, std::span<const double> x) {
  std::array<Jet2, kMaxDim> xj;
  for (int i = 0; i < n; ++i) xj[static_cast<size_t>(i)] = Jet2::variable(n, i, x[static_cast<size_t>(i)]);
  MetricJets m{n, {}};
  fn(xj.data(), m.g.data());
  return m;
}

Connection connection_from_jets(const MetricJets& m, bool with_derivative) {
  const int n = m.n;
  Connection c;
  c.g.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.g(i, j) = m.at(i, j).v;
  c.ginv = c.g.inverse();

  // first kind: G(l, i, j) = 1/2 (∂_i g_jl + ∂_j g_il - ∂_l g_ij)
  Tensor3 first(n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        first(l, i, j) = 0.5 * (m.at(j, l).d[i] + m.at(i, l).d[j] - m.at(i, j).d[l]);
  c.gamma = Tensor3(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l) s += c.ginv(k, l) * first(l, i, j);
        c.gamma(k, i, j) = s;
      }
  if (!with_derivative) return c;

  c.dgamma = Tensor4(n);
  for (int mm = 0; mm < n; ++mm) {
    // ∂_m g^{kl} = -g^{ka} ∂_m g_ab g^{bl}
    Eigen::MatrixXd dg(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) dg(a, b) = m.at(a, b).d[mm];
    const Eigen::MatrixXd dginv = -c.ginv * dg * c.ginv;
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int l = 0; l < n; ++l) {
            const double dfirst = 0.5 * (m.at(j, l).hess(mm, i) + m.at(i, l).hess(mm, j) -
                                         m.at(i, j).hess(mm, l));
            s += dginv(k, l) * first(l, i, j) + c.ginv(k, l) * dfirst;
          }
          c.dgamma(mm, k, i, j) = s;
        }
  }
  return c;
}

// Lowered Riemann tensor R_ijkl = g(R(∂_i, ∂_j)∂_l, ∂_k) in coordinates.
Tensor4 riemann_coord(const Connection& c) {
  const int n = static_cast<int>(c.g.rows());
  Tensor4 up(n);  // up(l, i, j, k) = R^l_ijk
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double s = c.dgamma(i, l, j, k) - c.dgamma(j, l, i, k);
          for (int m = 0; m < n; ++m)
            s += c.gamma(l, i, m) * c.gamma(m, j, k) - c.gamma(l, j, m) * c.gamma(m, i, k);
          up(l, i, j, k) = s;
        }
  Tensor4 R(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int m = 0; m < n; ++m) s += c.g(k, m) * up(m, i, j, l);
          R(i, j, k, l) = s;
        }
  return R;
}

Eigen::MatrixXd ricci_coord(const Tensor4& R, const Eigen::MatrixXd& ginv) {
  const int n = R.dim();
  Eigen::MatrixXd rc = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) rc(i, j) += ginv(a, b) * R(i, a, j, b);
  return 0.5 * (rc + rc.transpose());
}

// Symmetric inverse square root: columns orthonormal for g.
Eigen::MatrixXd orthonormal_frame(const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  const Eigen::VectorXd d = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Tensor4 to_frame4(const Tensor4& T, const Eigen::MatrixXd& E) {
  const int n = T.dim();
  Tensor4 a = T, b(n);
  // contract one slot at a time
  for (int slot = 0; slot < 4; ++slot) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) {
            double s = 0.0;
            for (int m = 0; m < n; ++m) {
              const std::array<int, 4> idx{i, j, k, l};
              std::array<int, 4> src = idx;
              src[static_cast<size_t>(slot)] = m;
              s += E(m, idx[static_cast<size_t>(slot)]) * a(src[0], src[1], src[2], src[3]);
            }
            b(i, j, k, l) = s;
          }
    std::swap(a, b);
  }
  return a;
}

Tensor3 to_frame3(const Tensor3& T, const Eigen::MatrixXd& E) {
  const int n = T.dim();
  Tensor3 r(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) s += T(i, j, k) * E(i, a) * E(j, b) * E(k, c);
        r(a, b, c) = s;
      }
  return r;
}

// Ricci (coordinates, flattened row-major) followed by Sc.
using RicciField = std::function<std::vector<double>(std::span<const double>)>;

struct FieldDerivatives {
  std::vector<double> value;                 // m
  std::vector<std::vector<double>> first;    // [k][m]
  std::vector<std::vector<double>> second;   // [k*n + l][m]
};

FieldDerivatives differentiate(const RicciField& F, std::span<const double> x, double h) {
  const int n = static_cast<int>(x.size());
  std::vector<double> y(x.begin(), x.end());
  auto at = [&](int k, double sk, int l, double sl) {
    std::vector<double> p = y;
    if (k >= 0) p[static_cast<size_t>(k)] += sk;
    if (l >= 0) p[static_cast<size_t>(l)] += sl;
    return F(p);
  };
  FieldDerivatives out;
  out.value = F(y);
  const size_t m = out.value.size();
  out.first.assign(static_cast<size_t>(n), std::vector<double>(m));
  out.second.assign(static_cast<size_t>(n * n), std::vector<double>(m));

  for (int k = 0; k < n; ++k) {
    std::array<std::vector<double>, 2> d1, d2;
    for (int lev = 0; lev < 2; ++lev) {
      const double s = lev == 0 ? h : 0.5 * h;
      const auto fp = at(k, s, -1, 0.0), fm = at(k, -s, -1, 0.0);
      d1[static_cast<size_t>(lev)].resize(m);
      d2[static_cast<size_t>(lev)].resize(m);
      for (size_t c = 0; c < m; ++c) {
        d1[static_cast<size_t>(lev)][c] = (fp[c] - fm[c]) / (2.0 * s);
        d2[static_cast<size_t>(lev)][c] = (fp[c] - 2.0 * out.value[c] + fm[c]) / (s * s);
      }
    }
    for (size_t c = 0; c < m; ++c) {
      out.first[static_cast<size_t>(k)][c] = (4.0 * d1[1][c] - d1[0][c]) / 3.0;
      out.second[static_cast<size_t>(k * n + k)][c] = (4.0 * d2[1][c] - d2[0][c]) / 3.0;
    }
  }
  for (int k = 0; k < n; ++k)
    for (int l = k + 1; l < n; ++l) {
      std::array<std::vector<double>, 2> mix;
      for (int lev = 0; lev < 2; ++lev) {
        const double s = lev == 0 ? h : 0.5 * h;
        const auto fpp = at(k, s, l, s), fpm = at(k, s, l, -s), fmp = at(k, -s, l, s),
                   fmm = at(k, -s, l, -s);
        mix[static_cast<size_t>(lev)].resize(m);
        for (size_t c = 0; c < m; ++c)
          mix[static_cast<size_t>(lev)][c] = (fpp[c] - fpm[c] - fmp[c] + fmm[c]) / (4.0 * s * s);
      }
      for (size_t c = 0; c < m; ++c) {
        const double v = (4.0 * mix[1][c] - mix[0][c]) / 3.0;
        out.second[static_cast<size_t>(k * n + l)][c] = v;
        out.second[static_cast<size_t>(l * n + k)][c] = v;
      }
    }
  return out;
}

double fd_step(const MetricChart& chart, std::span<const double> x) {
  const double base = std::pow(std::numeric_limits<double>::epsilon(), 1.0 / 6.0);
  const double clear = chart.domain().clearance(x);
  if (clear <= 0.0) throw Error(ErrorKind::OutOfDomain, "point outside chart domain");
  return std::min(base, 0.25 * clear);
}

// Covariant derivative fields at x from a Ricci field, written into `out`
// (which already holds rm, rc, sc in the orthonormal frame).
void fill_derivative_fields(const MetricChart& chart, std::span<const double> x, const Connection& conn,
                            const RicciField& field, CurvatureData& out) {
  const int n = chart.dim();
  const FieldDerivatives fd = differentiate(field, x, fd_step(chart, x));
  auto Rc = [&](int i, int j) { return fd.value[static_cast<size_t>(i * n + j)]; };
  auto dRc = [&](int k, int i, int j) { return fd.first[static_cast<size_t>(k)][static_cast<size_t>(i * n + j)]; };
  auto ddRc = [&](int k, int l, int i, int j) {
    return fd.second[static_cast<size_t>(k * n + l)][static_cast<size_t>(i * n + j)];
  };
  const size_t isc = static_cast<size_t>(n * n);
  const auto& G = conn.gamma;
  const auto& dG = conn.dgamma;

  // ∇_l R_ij and its coordinate derivative ∂_k ∇_l R_ij
  Tensor3 nab(n);  // nab(i, j, l) = ∇_l R_ij
  Tensor4 dnab(n);  // dnab(i, j, l, k) = ∂_k ∇_l R_ij
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        double s = dRc(l, i, j);
        for (int m = 0; m < n; ++m) s -= G(m, l, i) * Rc(m, j) + G(m, l, j) * Rc(i, m);
        nab(i, j, l) = s;
        for (int k = 0; k < n; ++k) {
          double d = ddRc(k, l, i, j);
          for (int m = 0; m < n; ++m)
            d -= dG(k, m, l, i) * Rc(m, j) + G(m, l, i) * dRc(k, m, j) + dG(k, m, l, j) * Rc(i, m) +
                 G(m, l, j) * dRc(k, i, m);
          dnab(i, j, l, k) = d;
        }
      }
  Tensor4 hess(n);  // hess(i, j, k, l) = ∇_k ∇_l R_ij
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = dnab(i, j, l, k);
          for (int m = 0; m < n; ++m)
            s -= G(m, k, l) * nab(i, j, m) + G(m, k, i) * nab(m, j, l) + G(m, k, j) * nab(i, m, l);
          hess(i, j, k, l) = s;
        }

  const Eigen::MatrixXd E = orthonormal_frame(conn.g);
  Eigen::VectorXd dsc(n);
  for (int k = 0; k < n; ++k) dsc(k) = fd.first[static_cast<size_t>(k)][isc];
  double lap = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = fd.second[static_cast<size_t>(i * n + j)][isc];
      for (int k = 0; k < n; ++k) s -= G(k, i, j) * dsc(k);
      lap += conn.ginv(i, j) * s;
    }
  const Eigen::VectorXd grad_on = E.transpose() * dsc;
  out.grad_sc.assign(grad_on.data(), grad_on.data() + n);
  out.lap_sc = lap;

  Tensor3 nab_perm(n);  // (i, j, k) = ∇_k R_ij already in that order
  nab_perm = nab;
  out.grad_rc = to_frame3(nab_perm, E);
  out.hess_rc = to_frame4(hess, E);

  // contracted Bianchi: Σ_i ∇_i R_ij = ½ ∇_j Sc
  double resid = 0.0, scale = 1.0;
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += (*out.grad_rc)(i, j, i);
    resid = std::max(resid, std::abs(s - 0.5 * out.grad_sc[static_cast<size_t>(j)]));
    scale = std::max(scale, std::abs(out.grad_sc[static_cast<size_t>(j)]));
  }
  scale = std::max(scale, std::abs(out.sc));
  if (resid > 1e-6 * scale)
    throw Error(ErrorKind::DifferentiationUnstable,
                "contracted Bianchi residual " + std::to_string(resid));
}

// Riemann data in the orthonormal frame from the jets alone.
CurvatureData base_curvature_from_jets(const MetricChart& chart, std::span<const double> x,
                                       Connection& conn_out) {
  const int n = chart.dim();
  conn_out = chart.connection(x, true);
  const Tensor4 Rc4 = riemann_coord(conn_out);
  const Eigen::MatrixXd E = orthonormal_frame(conn_out.g);
  Tensor4 on = to_frame4(Rc4, E);
  const double res = curvature_symmetry_residual(on);
  if (res > 1e-8 * std::max(1.0, on.max_abs()))
    throw Error(ErrorKind::DifferentiationUnstable, "Riemann symmetry residual " + std::to_string(res));
  // project onto exact symmetries (removes roundoff only)
  Tensor4 sym(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          sym(i, j, k, l) = 0.25 * (on(i, j, k, l) - on(j, i, k, l) - on(i, j, l, k) + on(j, i, l, k));
  Tensor4 pair(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) pair(i, j, k, l) = 0.5 * (sym(i, j, k, l) + sym(k, l, i, j));
  CurvatureData c = curvature_from_rm(AlgebraicCurvature(pair, 1e-8), false);
  c.n = n;
  return c;
}

std::vector<double> jet_ricci_field(const MetricChart& chart, std::span<const double> y) {
  const int n = chart.dim();
  const Connection c = chart.connection(y, true);
  const Tensor4 R = riemann_coord(c);
  const Eigen::MatrixXd rc = ricci_coord(R, c.ginv);
  std::vector<double> out(static_cast<size_t>(n * n + 1));
  double sc = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      out[static_cast<size_t>(i * n + j)] = rc(i, j);
      sc += c.ginv(i, j) * rc(i, j);
    }
  out[static_cast<size_t>(n * n)] = sc;
  return out;
}

// h(rho) = (sn_K(sqrt(rho))^2 / rho - 1) / rho as a jet in rho.
Jet2 space_form_h(double K, const Jet2& rho) {
  if (K == 0.0) return Jet2(rho.n, 0.0);
  const double z = K * rho.v;
  if (std::abs(z) <= 16.0) {
    // sin^2(√z)/z = Σ_k (-1)^k 2^{2k+1} z^k / (2k+2)!, so h = Σ_{k>=1} c_k K^k rho^{k-1}
    constexpr int terms = 40;
    std::array<double, terms + 1> coef{};
    double fact = 2.0;  // (2k+2)! at k = 0
    double pow2 = 2.0;  // 2^{2k+1}
    double Kk = 1.0;
    for (int k = 0; k <= terms; ++k) {
      if (k > 0) {
        fact *= (2.0 * k + 1.0) * (2.0 * k + 2.0);
        pow2 *= 4.0;
        Kk *= K;
      }
      coef[static_cast<size_t>(k)] = (k % 2 == 0 ? 1.0 : -1.0) * pow2 / fact * Kk;
    }
    Jet2 acc(rho.n, coef[terms]);
    for (int k = terms - 1; k >= 1; --k) acc = acc * rho + coef[static_cast<size_t>(k)];
    return acc;
  }
  const Jet2 r = sqrt(rho);
  Jet2 s = K > 0 ? sin(std::sqrt(K) * r) * (1.0 / std::sqrt(K)) : sinh(std::sqrt(-K) * r) * (1.0 / std::sqrt(-K));
  return (s * s / rho - 1.0) / rho;
}

// g_ij = δ_ij + h(ρ)(ρ δ_ij - x_i x_j) on the first `m` coordinates.
void space_form_metric(double K, int n, int m, const Jet2* x, Jet2* g) {
  Jet2 rho(n, 0.0);
  for (int i = 0; i < m; ++i) rho += x[i] * x[i];
  const Jet2 h = space_form_h(K, rho);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Jet2 v(n, i == j ? 1.0 : 0.0);
      if (i < m && j < m) {
        Jet2 inner = -(x[i] * x[j]);
        if (i == j) inner += rho;
        v += h * inner;
      }
      g[i * n + j] = v;
    }
}

Jet2 bump_profile(const Perturbation& p, int n, const Jet2* x) {
  Jet2 r2(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double c = p.center.empty() ? 0.0 : p.center[static_cast<size_t>(i)];
    const Jet2 d = x[i] - c;
    r2 += d * d;
  }
  return p.epsilon * exp(r2 * (-0.5 / (p.sigma * p.sigma)));
}

struct ConformalPieces {
  double phi;
  Eigen::MatrixXd A;  // ∇²φ - dφ⊗dφ + ½|dφ|² δ
};

ConformalPieces conformal_pieces(const Perturbation& p, int n, std::span<const double> x) {
  std::array<Jet2, kMaxDim> xj;
  for (int i = 0; i < n; ++i) xj[static_cast<size_t>(i)] = Jet2::variable(n, i, x[static_cast<size_t>(i)]);
  const Jet2 phi = bump_profile(p, n, xj.data());
  double grad2 = 0.0;
  for (int i = 0; i < n; ++i) grad2 += phi.d[i] * phi.d[i];
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      A(i, j) = phi.hess(i, j) - phi.d[i] * phi.d[j] + (i == j ? 0.5 * grad2 : 0.0);
  return {phi.v, A};
}

}  // namespace

// ---------------------------------------------------------------- domain

DomainBox DomainBox::cube(int n, double half_width) {
  DomainBox b;
  b.lo.assign(static_cast<size_t>(n), -half_width);
  b.hi.assign(static_cast<size_t>(n), half_width);
  return b;
}

bool DomainBox::contains(std::span<const double> x) const { return clearance(x) > 0.0; }

double DomainBox::clearance(std::span<const double> x) const {
  double c = std::numeric_limits<double>::infinity();
  double r2 = 0.0;
  for (size_t i = 0; i < lo.size(); ++i) {
    c = std::min({c, x[i] - lo[i], hi[i] - x[i]});
    r2 += x[i] * x[i];
  }
  if (std::isfinite(max_norm)) c = std::min(c, max_norm - std::sqrt(r2));
  return c;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Flat: return "flat";
    case ModelKind::SpaceForm: return "space_form";
    case ModelKind::ProductSphereLine: return "product_sphere_line";
    case ModelKind::ConformalFlat: return "conformal_flat";
  }
  return "unknown";
}

std::optional<ModelKind> model_kind_from_string(const std::string& s) {
  if (s == "flat") return ModelKind::Flat;
  if (s == "space_form") return ModelKind::SpaceForm;
  if (s == "product_sphere_line") return ModelKind::ProductSphereLine;
  if (s == "conformal_flat") return ModelKind::ConformalFlat;
  return std::nullopt;
}

double sn_k(double K, double r) {
  if (K > 0) return std::sin(std::sqrt(K) * r) / std::sqrt(K);
  if (K < 0) return std::sinh(std::sqrt(-K) * r) / std::sqrt(-K);
  return r;
}

double cs_k(double K, double r) {
  if (K > 0) return std::cos(std::sqrt(K) * r);
  if (K < 0) return std::cosh(std::sqrt(-K) * r);
  return 1.0;
}

// ---------------------------------------------------------------- MetricChart

MetricChart::MetricChart(int n, DomainBox domain, MetricJetFn metric, std::string name)
    : n_(n), domain_(std::move(domain)), metric_(std::move(metric)), name_(std::move(name)) {
  if (n < 2 || n > kMaxDim) throw Error(ErrorKind::InvalidSpec, "chart dimension must be in [2, 6]");
  if (static_cast<int>(domain_.lo.size()) != n || static_cast<int>(domain_.hi.size()) != n)
    throw Error(ErrorKind::DimensionMismatch, "domain box dimension");
  // positive-definiteness on a 5^n sample grid (interior points only)
  const int per_axis = 5;
  int total = 1;
  for (int i = 0; i < n; ++i) total *= per_axis;
  std::vector<double> x(static_cast<size_t>(n));
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    for (int i = 0; i < n; ++i) {
      const int k = rem % per_axis;
      rem /= per_axis;
      const double f = (k + 0.5) / per_axis;
      x[static_cast<size_t>(i)] = domain_.lo[static_cast<size_t>(i)] +
                                  f * (domain_.hi[static_cast<size_t>(i)] - domain_.lo[static_cast<size_t>(i)]);
    }
    if (!domain_.contains(x)) continue;
    const Eigen::MatrixXd g = this->metric(x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0))
      throw Error(ErrorKind::InvalidSpec, "metric is not positive definite on the domain");
  }
}

void MetricChart::metric_jet(std::span<const double> x, Jet2* g) const {
  std::array<Jet2, kMaxDim> xj;
  for (int i = 0; i < n_; ++i) xj[static_cast<size_t>(i)] = Jet2::variable(n_, i, x[static_cast<size_t>(i)]);
  metric_(xj.data(), g);
}

Eigen::MatrixXd MetricChart::metric(std::span<const double> x) const {
  std::array<Jet2, kMaxDim * kMaxDim> g;
  metric_jet(x, g.data());
  Eigen::MatrixXd m(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) m(i, j) = g[static_cast<size_t>(i * n_ + j)].v;
  return m;
}

Connection MetricChart::connection(std::span<const double> x, bool with_derivative) const {
  return connection_from_jets(eval_jets(metric_, n_, x), with_derivative);
}

double MetricChart::scalar_curvature(std::span<const double> x) const {
  if (scalar_) return (*scalar_)(x);
  return jet_ricci_field(*this, x).back();
}

// ---------------------------------------------------------------- catalog

MetricChart make_chart(const ModelSpec& spec) {
  const int n = spec.n;
  if (n < 2 || n > kMaxDim) throw Error(ErrorKind::InvalidSpec, "dimension must be in [2, 6]");
  const double K = spec.K;
  switch (spec.kind) {
    case ModelKind::Flat: {
      const double L = spec.radius > 0 ? spec.radius : 10.0;
      MetricChart chart(
          n, DomainBox::cube(n, L),
          [n](const Jet2*, Jet2* g) {
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < n; ++j) g[i * n + j] = Jet2(n, i == j ? 1.0 : 0.0);
          },
          "flat");
      chart.set_curvature_callback([n](std::span<const double>) { return space_form_curvature(n, 0.0); });
      chart.set_scalar_curvature([](std::span<const double>) { return 0.0; });
      chart.set_model(spec);
      return chart;
    }
    case ModelKind::SpaceForm: {
      double R = spec.radius;
      if (K > 0) {
        const double conj = kPi / std::sqrt(K);
        if (R <= 0) R = 0.9 * conj;
        if (R >= conj)
          throw Error(ErrorKind::InvalidSpec, "space form chart radius must stay below pi/sqrt(K)");
      } else if (R <= 0) {
        R = K < 0 ? 6.0 / std::sqrt(-K) : 10.0;
      }
      DomainBox box = DomainBox::cube(n, R);
      box.max_norm = R;
      MetricChart chart(
          n, box, [K, n](const Jet2* x, Jet2* g) { space_form_metric(K, n, n, x, g); }, "space_form");
      chart.set_curvature_callback([n, K](std::span<const double>) { return space_form_curvature(n, K); });
      const double sc = n * (n - 1.0) * K;
      chart.set_scalar_curvature([sc](std::span<const double>) { return sc; });
      ModelSpec s = spec;
      s.radius = R;
      chart.set_model(s);
      return chart;
    }
    case ModelKind::ProductSphereLine: {
      if (n < 3) throw Error(ErrorKind::InvalidSpec, "product_sphere_line needs n >= 3");
      if (!(K > 0)) throw Error(ErrorKind::InvalidSpec, "product_sphere_line needs K > 0");
      const double conj = kPi / std::sqrt(K);
      double L = spec.radius > 0 ? spec.radius : 0.9 * conj / std::sqrt(n - 1.0);
      if (L * std::sqrt(n - 1.0) >= conj)
        throw Error(ErrorKind::InvalidSpec, "product chart box reaches the conjugate radius");
      MetricChart chart(
          n, DomainBox::cube(n, L),
          [K, n](const Jet2* x, Jet2* g) { space_form_metric(K, n, n - 1, x, g); }, "product_sphere_line");
      chart.set_curvature_callback([n, K](std::span<const double>) {
        Sym2 P(n);
        for (int i = 0; i < n - 1; ++i) P.set(i, i, 1.0);
        return curvature_from_rm(AlgebraicCurvature(0.5 * K * kulkarni_nomizu(P, P)), true);
      });
      const double sc = (n - 1.0) * (n - 2.0) * K;
      chart.set_scalar_curvature([sc](std::span<const double>) { return sc; });
      ModelSpec s = spec;
      s.radius = L;
      chart.set_model(s);
      return chart;
    }
    case ModelKind::ConformalFlat: {
      const double L = spec.radius > 0 ? spec.radius : 5.0;
      Perturbation p = spec.perturbation.value_or(Perturbation{});
      if (!p.center.empty() && static_cast<int>(p.center.size()) != n)
        throw Error(ErrorKind::DimensionMismatch, "perturbation center dimension");
      if (!(p.sigma > 0)) throw Error(ErrorKind::InvalidSpec, "perturbation sigma must be positive");
      auto chart = std::make_shared<MetricChart>(
          n, DomainBox::cube(n, L),
          [p, n](const Jet2* x, Jet2* g) {
            const Jet2 f = exp(2.0 * bump_profile(p, n, x));
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < n; ++j) g[i * n + j] = i == j ? f : Jet2(n, 0.0);
          },
          "conformal_flat");
      MetricChart out = *chart;
      out.set_scalar_curvature([p, n](std::span<const double> x) {
        const auto c = conformal_pieces(p, n, x);
        return -2.0 * (n - 1.0) * std::exp(-2.0 * c.phi) * c.A.trace();
      });
      // Rm = -e^{-2φ} A⊙δ in the frame e^{-φ}∂_i; derivative fields by
      // differencing the analytic coordinate Ricci field -((n-2)A + tr(A)δ).
      out.set_curvature_callback([p, n, chart](std::span<const double> x) {
        const auto pc = conformal_pieces(p, n, x);
        const double s = std::exp(-2.0 * pc.phi);
        const Sym2 A = Sym2::from_matrix(pc.A, 1e-12);
        CurvatureData c =
            curvature_from_rm(AlgebraicCurvature(-s * kulkarni_nomizu(A, Sym2::identity(n)), 1e-9), false);
        RicciField field = [p, n](std::span<const double> y) {
          const auto q = conformal_pieces(p, n, y);
          std::vector<double> v(static_cast<size_t>(n * n + 1));
          const double tr = q.A.trace();
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              v[static_cast<size_t>(i * n + j)] = -((n - 2.0) * q.A(i, j) + (i == j ? tr : 0.0));
          v[static_cast<size_t>(n * n)] = -2.0 * (n - 1.0) * std::exp(-2.0 * q.phi) * tr;
          return v;
        };
        const Connection conn = chart->connection(x, true);
        fill_derivative_fields(*chart, x, conn, field, c);
        return c;
      });
      ModelSpec s = spec;
      s.radius = L;
      s.perturbation = p;
      out.set_model(s);
      return out;
    }
  }
  throw Error(ErrorKind::InvalidSpec, "unknown model kind");
}

// ---------------------------------------------------------------- curvature

CurvatureData curvature_generic(const MetricChart& chart, std::span<const double> x) {
  if (static_cast<int>(x.size()) != chart.dim()) throw Error(ErrorKind::DimensionMismatch, "curvature point");
  if (!chart.domain().contains(x)) throw Error(ErrorKind::OutOfDomain, "curvature point outside domain");
  Connection conn;
  CurvatureData c = base_curvature_from_jets(chart, x, conn);
  RicciField field = [&chart](std::span<const double> y) { return jet_ricci_field(chart, y); };
  fill_derivative_fields(chart, x, conn, field, c);
  return c;
}

CurvatureData curvature_at(const MetricChart& chart, std::span<const double> x) {
  if (static_cast<int>(x.size()) != chart.dim()) throw Error(ErrorKind::DimensionMismatch, "curvature point");
  if (!chart.domain().contains(x)) throw Error(ErrorKind::OutOfDomain, "curvature point outside domain");
  if (chart.curvature_callback()) return (*chart.curvature_callback())(x);
  return curvature_generic(chart, x);
}

DensitySeries density_series(const CurvatureData& curv) {
  const int n = curv.n;
  DensitySeries s;
  s.order2 = (-1.0 / 6.0) * curv.rc;
  s.order3 = Tensor3(n);
  if (curv.grad_rc)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) s.order3(i, j, k) = -(*curv.grad_rc)(i, j, k) / 12.0;
  if (curv.hess_rc) s.order4 = v_tensor(curv);
  return s;
}

// ---------------------------------------------------------------- normal charts

double injectivity_bound(const MetricChart& chart) {
  const auto& m = chart.model();
  if (m && (m->kind == ModelKind::SpaceForm || m->kind == ModelKind::ProductSphereLine) && m->K > 0)
    return kPi / std::sqrt(m->K);
  return std::numeric_limits<double>::infinity();
}

NormalChart::NormalChart(std::shared_ptr<const MetricChart> base, std::vector<double> center, double radius,
                         Method method, ShootingOptions opts)
    : base_(std::move(base)), center_(std::move(center)), radius_(radius), method_(method), opts_(opts) {
  frame_ = orthonormal_frame(base_->metric(center_));
}

namespace {

using State = std::vector<double>;

struct GeodesicSystem {
  const MetricChart* chart;
  int n;
  void operator()(const State& y, State& dy, double /*s*/) const {
    const std::span<const double> c(y.data(), static_cast<size_t>(n));
    const double* v = y.data() + n;
    const double* J = y.data() + 2 * n;
    const double* Jp = y.data() + 2 * n + n * n;
    dy.assign(y.size(), 0.0);
    if (!chart->domain().contains(c)) {
      // keep integrating with frozen state; the observer reports the exit
      return;
    }
    const Connection conn = chart->connection(c, true);
    for (int k = 0; k < n; ++k) {
      dy[static_cast<size_t>(k)] = v[k];
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) acc -= conn.gamma(k, i, j) * v[i] * v[j];
      dy[static_cast<size_t>(n + k)] = acc;
    }
    for (int k = 0; k < n; ++k)
      for (int m = 0; m < n; ++m) {
        dy[static_cast<size_t>(2 * n + k * n + m)] = Jp[k * n + m];
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double dG = 0.0;
            for (int l = 0; l < n; ++l) dG += conn.dgamma(l, k, i, j) * J[l * n + m];
            acc -= dG * v[i] * v[j] + 2.0 * conn.gamma(k, i, j) * v[i] * Jp[j * n + m];
          }
        dy[static_cast<size_t>(2 * n + n * n + k * n + m)] = acc;
      }
  }
};

NormalSample closed_form_sample(double K, int n, std::span<const double> x) {
  NormalSample s;
  s.point.assign(x.begin(), x.end());
  s.ginv = Eigen::MatrixXd::Identity(n, n);
  s.scalar_curvature = n * (n - 1.0) * K;
  double r2 = 0.0;
  for (double c : x) r2 += c * c;
  const double r = std::sqrt(r2);
  if (r == 0.0) return s;
  const double q = sn_k(K, r) / r;
  s.density = std::pow(q, n - 1);
  const double tang = 1.0 / (q * q);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double radial = x[static_cast<size_t>(i)] * x[static_cast<size_t>(j)] / r2;
      s.ginv(i, j) = radial + tang * ((i == j ? 1.0 : 0.0) - radial);
    }
  return s;
}

}  // namespace

std::vector<NormalSample> NormalChart::sample_ray(std::span<const double> direction,
                                                  std::span<const double> radii) const {
  const int n = dim();
  std::vector<NormalSample> out;
  out.reserve(radii.size());
  if (method_ != Method::Shooting) {
    std::vector<double> x(static_cast<size_t>(n));
    for (double r : radii) {
      for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] = r * direction[static_cast<size_t>(i)];
      out.push_back(sample(x));
    }
    return out;
  }

  State y(static_cast<size_t>(2 * n + 2 * n * n), 0.0);
  Eigen::VectorXd theta(n);
  for (int i = 0; i < n; ++i) theta(i) = direction[static_cast<size_t>(i)];
  const Eigen::VectorXd v0 = frame_ * theta;
  for (int i = 0; i < n; ++i) {
    y[static_cast<size_t>(i)] = center_[static_cast<size_t>(i)];
    y[static_cast<size_t>(n + i)] = v0(i);
    for (int m = 0; m < n; ++m) y[static_cast<size_t>(2 * n + n * n + i * n + m)] = frame_(i, m);
  }

  std::vector<double> times;
  times.reserve(radii.size() + 1);
  times.push_back(0.0);
  size_t zero_count = 0;
  for (double r : radii) {
    if (r <= 0.0) {
      ++zero_count;
      continue;
    }
    if (r <= times.back()) throw Error(ErrorKind::InvalidSpec, "ray radii must be increasing");
    times.push_back(r);
  }
  for (size_t k = 0; k < zero_count; ++k) out.push_back(sample(std::vector<double>(static_cast<size_t>(n), 0.0)));
  if (times.size() == 1) return out;

  GeodesicSystem sys{base_.get(), n};
  auto observer = [&](const State& st, double s) {
    if (s <= 0.0) return;
    NormalSample smp;
    smp.point.assign(st.begin(), st.begin() + n);
    if (!base_->domain().contains(smp.point))
      throw Error(ErrorKind::GeodesicLeftDomain, "geodesic left the chart domain");
    Eigen::MatrixXd D(n, n);
    for (int k = 0; k < n; ++k)
      for (int m = 0; m < n; ++m) D(k, m) = st[static_cast<size_t>(2 * n + k * n + m)] / s;
    // D = d exp_p(sθ) applied to the frame; columns map normal-coordinate axes
    const double detD = D.determinant();
    if (!(detD > 0.0)) throw Error(ErrorKind::JacobianSingular, "conjugate point before the requested radius");
    const Eigen::MatrixXd g = base_->metric(smp.point);
    const Eigen::MatrixXd gt = D.transpose() * g * D;
    smp.ginv = gt.inverse();
    smp.density = std::sqrt(gt.determinant());
    smp.scalar_curvature = base_->scalar_curvature(smp.point);
    out.push_back(std::move(smp));
  };
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_dense_output(opts_.abs_tol, opts_.rel_tol, ode::runge_kutta_dopri5<State>());
  const double dt0 = std::min(1e-3, 0.1 * times[1]);
  ode::integrate_times(stepper, sys, y, times.begin(), times.end(), dt0, observer);
  return out;
}

NormalSample NormalChart::sample(std::span<const double> x) const {
  const int n = dim();
  if (static_cast<int>(x.size()) != n) throw Error(ErrorKind::DimensionMismatch, "normal coordinate point");
  double r2 = 0.0;
  for (double c : x) r2 += c * c;
  const double r = std::sqrt(r2);
  switch (method_) {
    case Method::Translation: {
      NormalSample s;
      s.point.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) s.point[static_cast<size_t>(i)] = center_[static_cast<size_t>(i)] + x[static_cast<size_t>(i)];
      s.ginv = Eigen::MatrixXd::Identity(n, n);
      s.scalar_curvature = base_->scalar_curvature(s.point);
      return s;
    }
    case Method::ClosedFormSpaceForm:
      return closed_form_sample(base_->model()->K, n, x);
    case Method::Shooting: {
      if (r == 0.0) {
        NormalSample s;
        s.point = center_;
        s.ginv = Eigen::MatrixXd::Identity(n, n);
        s.scalar_curvature = base_->scalar_curvature(center_);
        return s;
      }
      std::vector<double> dir(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) dir[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] / r;
      const double rr[1] = {r};
      return sample_ray(dir, rr).front();
    }
  }
  throw Error(ErrorKind::InvalidSpec, "unknown normal chart method");
}

Eigen::MatrixXd NormalChart::pulled_back_metric(std::span<const double> x) const { return sample(x).ginv.inverse(); }

NormalChart build_normal_chart(std::shared_ptr<const MetricChart> chart, std::vector<double> p, double r0,
                               ShootingOptions opts) {
  const int n = chart->dim();
  if (static_cast<int>(p.size()) != n) throw Error(ErrorKind::DimensionMismatch, "normal chart center");
  if (!(r0 > 0.0)) throw Error(ErrorKind::InvalidSpec, "normal chart radius must be positive");
  if (!chart->domain().contains(p)) throw Error(ErrorKind::OutOfDomain, "center outside chart domain");
  if (r0 >= injectivity_bound(*chart))
    throw Error(ErrorKind::InvalidSpec, "radius exceeds the injectivity bound of the model");

  const auto& model = chart->model();
  double pnorm = 0.0;
  for (double c : p) pnorm += c * c;
  pnorm = std::sqrt(pnorm);

  if (model && model->kind == ModelKind::Flat) {
    if (chart->domain().clearance(p) <= r0) throw Error(ErrorKind::OutOfDomain, "ball leaves the flat chart");
    return NormalChart(chart, std::move(p), r0, NormalChart::Method::Translation, opts);
  }
  if (model && model->kind == ModelKind::SpaceForm) {
    if (pnorm + r0 >= chart->domain().max_norm)
      throw Error(ErrorKind::OutOfDomain, "ball leaves the space-form chart");
    const auto method = pnorm == 0.0 ? NormalChart::Method::ClosedFormSpaceForm : NormalChart::Method::Shooting;
    return NormalChart(chart, std::move(p), r0, method, opts);
  }
  NormalChart nc(chart, std::move(p), r0, NormalChart::Method::Shooting, opts);
  // probe the boundary of the ball along the coordinate axes
  std::vector<double> dir(static_cast<size_t>(n), 0.0);
  const double rr[1] = {r0};
  for (int i = 0; i < n; ++i)
    for (double sgn : {1.0, -1.0}) {
      std::fill(dir.begin(), dir.end(), 0.0);
      dir[static_cast<size_t>(i)] = sgn;
      nc.sample_ray(dir, rr);
    }
  return nc;
}

}  // namespace curvex
