#include "curvex/expansion.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace curvex {

namespace {

void require_complete(const CurvatureData& c) {
  if (!c.lap_sc) throw Error(ErrorKind::MissingField, "predictors need the Laplacian of Sc");
}

double a_defect(const CurvatureData& curv, const Sym2& a) {
  if (a.dim() != curv.n) throw Error(ErrorKind::DimensionMismatch, "a has the wrong dimension");
  return (a - (1.0 / 3.0) * curv.rc).norm2();
}

struct Fit {
  Eigen::VectorXd coef;
  Eigen::VectorXd err;
  double residual = 0.0;
};

Fit weighted_fit(const std::vector<SeriesSample>& s, SeriesModel model) {
  const int p = model == SeriesModel::Full012 ? 3 : 2;
  const int m = static_cast<int>(s.size());
  Eigen::MatrixXd A(m, p);
  Eigen::VectorXd b(m), w(m);
  for (int i = 0; i < m; ++i) {
    const auto& x = s[static_cast<size_t>(i)];
    int c = 0;
    if (p == 3) A(i, c++) = 1.0;
    A(i, c++) = x.t;
    A(i, c++) = x.t * x.t;
    const double floor = 1e-14 * std::abs(x.value);
    const double var = x.quad_error * x.quad_error + floor * floor;
    w(i) = 1.0 / std::max(var, 1e-300);
    b(i) = x.value;
  }
  const Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::MatrixXd Aw = sw.asDiagonal() * A;
  const Eigen::VectorXd bw = sw.asDiagonal() * b;
  // column scaling so the condition number reflects the model, not units
  Eigen::VectorXd scale(p);
  for (int c = 0; c < p; ++c) scale(c) = Aw.col(c).norm();
  const Eigen::MatrixXd An = Aw * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(An, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto sv = svd.singularValues();
  const double cond = sv(0) / sv(p - 1);
  if (!(cond < 1e8)) throw Error(ErrorKind::IllConditionedFit, "design condition number " + std::to_string(cond));
  const Eigen::VectorXd yn = svd.solve(bw);
  Fit f;
  f.coef = scale.cwiseInverse().asDiagonal() * yn;
  const Eigen::VectorXd r = bw - Aw * f.coef;
  const int dof = m - p;
  const double chi2 = dof > 0 ? r.squaredNorm() / dof : 0.0;
  const Eigen::MatrixXd covn = svd.matrixV() * sv.cwiseAbs2().cwiseInverse().asDiagonal() * svd.matrixV().transpose();
  f.err.resize(p);
  for (int c = 0; c < p; ++c) f.err(c) = std::sqrt(covn(c, c) * std::max(1.0, chi2)) / scale(c);
  for (int i = 0; i < m; ++i) {
    const double fitted = (A.row(i) * f.coef)(0);
    const double den = std::abs(b(i)) > 0 ? std::abs(b(i)) : 1.0;
    f.residual = std::max(f.residual, std::abs(b(i) - fitted) / den);
  }
  return f;
}

SeriesCoefficients to_series(const Fit& f, SeriesModel model) {
  SeriesCoefficients s;
  int c = 0;
  if (model == SeriesModel::Full012) {
    s.c0 = f.coef(0);
    s.stderr_[0] = f.err(0);
    c = 1;
  }
  s.c1 = f.coef(c);
  s.stderr_[1] = f.err(c);
  s.c2 = f.coef(c + 1);
  s.stderr_[2] = f.err(c + 1);
  s.fit_residual = f.residual;
  return s;
}

}  // namespace

SeriesCoefficients predict_L(const CurvatureData& curv, const Sym2& a, double alpha) {
  require_complete(curv);
  const double sc = curv.sc;
  SeriesCoefficients s;
  s.c1 = -sc;
  s.c2 = -(*curv.lap_sc - sc * sc / 3.0 + 2.0 * a.trace() * sc + alpha * sc + curv.rm_norm2() / 6.0 -
           4.0 * a_defect(curv, a));
  return s;
}

SeriesCoefficients predict_W(const CurvatureData& curv, const Sym2& a) {
  require_complete(curv);
  SeriesCoefficients s;
  s.c2 = -(curv.rm_norm2() / 6.0 - 4.0 * a_defect(curv, a));
  return s;
}

SeriesCoefficients predict_scalar_term(const CurvatureData& curv, const Sym2& a, double alpha) {
  require_complete(curv);
  if (a.dim() != curv.n) throw Error(ErrorKind::DimensionMismatch, "a has the wrong dimension");
  const double sc = curv.sc;
  SeriesCoefficients s;
  s.c1 = sc;
  s.c2 = *curv.lap_sc - sc * sc / 3.0 + 2.0 * a.trace() * sc + alpha * sc;
  return s;
}

VolumeCoefficients predict_volume(const CurvatureData& curv) {
  require_complete(curv);
  const int n = curv.n;
  const double sc = curv.sc;
  VolumeCoefficients v;
  v.coeff_r2 = -sc / (6.0 * (n + 2));
  v.coeff_r4 = -(*curv.lap_sc - 5.0 * sc * sc / 18.0 + curv.rm_norm2() / 6.0 - 4.0 * curv.rc_norm2() / 9.0) /
               (20.0 * (n + 2) * (n + 4));
  return v;
}

SeriesCoefficients extract_series(const std::vector<SeriesSample>& samples, SeriesModel model,
                                  std::optional<double> expected_c2_scale) {
  if (samples.size() < 6) throw Error(ErrorKind::InvalidSpec, "series extraction needs at least 6 samples");
  std::vector<SeriesSample> s = samples;
  std::sort(s.begin(), s.end(), [](const auto& x, const auto& y) { return x.t > y.t; });
  if (!(s.back().t > 0.0)) throw Error(ErrorKind::InvalidSpec, "sample times must be positive");
  if (s.front().t < 8.0 * s.back().t) throw Error(ErrorKind::InvalidSpec, "samples must span a factor 8 in t");
  if (expected_c2_scale) {
    const double signal = std::abs(*expected_c2_scale) * s.front().t * s.front().t;
    if (s.front().quad_error > 0.1 * signal)
      throw Error(ErrorKind::NoiseDominates, "quadrature error comparable to the t² term");
  }
  const int p = model == SeriesModel::Full012 ? 3 : 2;
  const Fit full = weighted_fit(s, model);
  const size_t half = std::max<size_t>(static_cast<size_t>(p + 1), (s.size() + 1) / 2);
  const std::vector<SeriesSample> tail(s.end() - static_cast<long>(half), s.end());
  const Fit small = weighted_fit(tail, model);
  SeriesCoefficients out = to_series(small, model);
  const SeriesCoefficients f = to_series(full, model);
  out.systematic = {std::abs(out.c0 - f.c0), std::abs(out.c1 - f.c1), std::abs(out.c2 - f.c2)};
  out.fit_residual = std::max(out.fit_residual, f.fit_residual);
  return out;
}

TGrid make_t_grid(double t_max, int points, double factor) {
  if (!(t_max > 0.0) || points < 2 || !(factor > 0.0 && factor < 1.0))
    throw Error(ErrorKind::InvalidSpec, "bad t-grid parameters");
  TGrid g;
  g.refinement_factor = factor;
  double t = t_max;
  for (int i = 0; i < points; ++i, t *= factor) g.values.push_back(t);
  return g;
}

double choose_t_max(int n, double support_radius, double c2_scale, double rel) {
  const double scale = std::max(std::abs(c2_scale), 1e-3);
  auto ok = [&](double t) {
    return cutoff_tail_bound(n, support_radius / (4.0 * std::sqrt(t))) < rel * scale * t * t;
  };
  double lo = 1e-12, hi = 1.0;
  if (!ok(lo)) throw Error(ErrorKind::InvalidSpec, "no admissible time for this support radius");
  if (ok(hi)) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    (ok(mid) ? lo : hi) = mid;
    if (hi / lo < 1.0 + 1e-10) break;
  }
  return lo;
}

std::vector<SeriesSample> sample_series(const TestFunction& tf, FunctionalKind kind, const TGrid& grid,
                                        const QuadratureSpec& q, ExecPolicy policy) {
  std::vector<SeriesSample> out;
  for (double t : grid.values) {
    const FunctionalValue v = kind == FunctionalKind::L ? eval_L(tf, t, q, policy) : eval_W(tf, t, q, policy);
    out.push_back({t, v.value, v.quad_error_estimate});
  }
  return out;
}

}  // namespace curvex
