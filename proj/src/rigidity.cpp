#include "curvex/rigidity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "curvex/isoperimetry.hpp"
#include "curvex/quadrature.hpp"

namespace curvex {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::ConsistentWithRigidity: return "consistent_with_rigidity";
    case Verdict::HypothesisViolated: return "hypothesis_violated";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Check scalar_bound_check(double c1_measured, double err, int n, double K) {
  Check c;
  c.name = "scalar_bound";
  c.margin = n * (n - 1) * K + c1_measured;
  c.tolerance = std::abs(err);
  c.holds = c.margin >= -c.tolerance;
  return c;
}

double rm_bound_from_mu(double gamma, double Q) {
  if (!(gamma < 1.0 / 6.0)) throw Error(ErrorKind::GammaOutOfRange, "gamma must be below 1/6");
  if (Q < 0.0) throw Error(ErrorKind::InvalidSpec, "Q must be nonnegative");
  return Q / (1.0 / 6.0 - gamma);
}

CurvatureResidual constant_curvature_residual(const CurvatureData& curv, double K) {
  const int n = curv.n;
  if (n < 3) throw Error(ErrorKind::DimensionTooSmall, "constant-curvature residual needs n >= 3");
  const CurvatureDecomposition d = weyl_decompose(curv.rm);
  CurvatureResidual r;
  r.rm_excess = curv.rm_norm2() - 2.0 * n * (n - 1) * K * K;
  r.weyl_norm = std::sqrt(d.weyl.norm2());
  r.traceless_rc_norm = std::sqrt(d.traceless_ricci_part.norm2());
  return r;
}

namespace {

Check make(std::string name, CheckRole role, const std::vector<double>& p, double margin, double tol) {
  Check c;
  c.name = std::move(name);
  c.role = role;
  c.point = p;
  c.margin = margin;
  c.tolerance = tol;
  c.holds = margin >= -tol;
  return c;
}

}  // namespace

RigidityReport theorem_1_1_pipeline(std::shared_ptr<const MetricChart> chart,
                                    const std::vector<std::vector<double>>& points, double K,
                                    const std::vector<double>& beta_probe, const PipelineOptions& opts) {
  const int n = chart->dim();
  if (points.empty()) throw Error(ErrorKind::InvalidSpec, "no sample points");
  RigidityReport rep;
  const double sc_model = n * (n - 1) * K;
  double beta_max = 0.0;
  for (double b : beta_probe) beta_max = std::max(beta_max, b);
  for (const auto& p : points) {
    const CurvatureData cd = curvature_at(*chart, p);
    rep.checks.push_back(make("scalar_lower_bound", CheckRole::Hypothesis, p, cd.sc - sc_model, opts.tol));
    if (opts.extended) {
      if (!cd.lap_sc) throw Error(ErrorKind::MissingField, "extended pipeline needs the Laplacian of Sc");
      rep.checks.push_back(make("laplacian_nonnegative", CheckRole::Hypothesis, p, *cd.lap_sc, opts.tol));
    }
    if (!beta_probe.empty()) {
      const double r_guess = std::pow(beta_max / quad::unit_ball_volume(n), 1.0 / n);
      const double r0 = std::min(2.0 * r_guess, 0.9 * injectivity_bound(*chart));
      const NormalChart nc = build_normal_chart(chart, p, r0);
      for (double b : beta_probe) {
        const double r = geodesic_ball_radius(nc, b, opts.quad);
        const double area = geodesic_sphere_area(nc, r, opts.quad);
        const double model = iso_profile(n, K, b);
        rep.checks.push_back(
            make("ball_isoperimetric_probe", CheckRole::Probe, p, area / model - 1.0, opts.tol));
      }
    }
    const CurvatureResidual res = constant_curvature_residual(cd, K);
    const double worst = std::max({std::abs(res.rm_excess), res.weyl_norm, res.traceless_rc_norm});
    rep.checks.push_back(make("constant_curvature", CheckRole::Conclusion, p, -worst, opts.tol));
  }
  bool hyp_ok = true, concl_ok = true;
  for (size_t i = 0; i < rep.checks.size(); ++i) {
    const Check& c = rep.checks[i];
    if (c.holds) continue;
    rep.violations.push_back(i);
    if (c.role == CheckRole::Conclusion) concl_ok = false;
    else hyp_ok = false;
  }
  if (!hyp_ok) rep.verdict = Verdict::HypothesisViolated;
  else if (concl_ok) rep.verdict = Verdict::ConsistentWithRigidity;
  else rep.verdict = Verdict::Inconclusive;
  return rep;
}

}  // namespace curvex
