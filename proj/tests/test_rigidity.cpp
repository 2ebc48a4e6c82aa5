#include "test_main.hpp"

#include <cmath>

#include "curvex/rigidity.hpp"

using namespace curvex;

namespace {

std::shared_ptr<const MetricChart> chart_of(ModelKind kind, double K, std::optional<Perturbation> pert = std::nullopt) {
  ModelSpec s;
  s.kind = kind;
  s.n = 3;
  s.K = K;
  s.perturbation = std::move(pert);
  return std::make_shared<const MetricChart>(make_chart(s));
}

}  // namespace

TEST_CASE("scalar bound examples") {
  const Check sphere = scalar_bound_check(-6.0, 1e-9, 3, 1.0);
  CHECK(sphere.margin == doctest::Approx(0.0).scale(1.0));
  CHECK(sphere.holds);
  CHECK(scalar_bound_check(0.0, 1e-9, 3, 0.0).holds);
  const Check bad = scalar_bound_check(-6.5, 0.1, 3, 1.0);
  CHECK(bad.margin == doctest::Approx(-0.5));
  CHECK_FALSE(bad.holds);
  CHECK(scalar_bound_check(-6.05, 0.1, 3, 1.0).holds);

  // conformal bump: curvature at a point where Sc < 0, as measured c1 = −Sc
  Perturbation p;
  p.epsilon = 0.05;
  p.sigma = 0.5;
  const auto c = chart_of(ModelKind::ConformalFlat, 0.0, p);
  const std::vector<double> x{1.0, 0.0, 0.0};
  const double sc = curvature_at(*c, x).sc;
  REQUIRE(sc < 0.0);
  const Check ck = scalar_bound_check(-sc, 1e-10, 3, 0.0);
  CHECK(ck.margin == doctest::Approx(-sc));
  CHECK(ck.holds);
}

TEST_CASE("mu bound arithmetic") {
  CHECK(rm_bound_from_mu(0.0, 0.0) == 0.0);
  CHECK(rm_bound_from_mu(0.0, 1.0) == doctest::Approx(6.0));
  CHECK(rm_bound_from_mu(1.0 / 12.0, 1.0) == doctest::Approx(12.0));
  double last = 0.0;
  for (double g : {-1.0, 0.0, 0.1, 0.16}) {
    const double b = rm_bound_from_mu(g, 1.0);
    CHECK(b > last);
    last = b;
  }
  CHECK(rm_bound_from_mu(0.1, 2.0) > rm_bound_from_mu(0.1, 1.0));
  try {
    rm_bound_from_mu(1.0 / 6.0, 1.0);
    FAIL("expected GammaOutOfRange");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GammaOutOfRange);
  }
}

TEST_CASE("constant curvature residuals") {
  for (double K : {-1.0, 0.0, 0.5, 1.0}) {
    const auto r = constant_curvature_residual(space_form_curvature(3, K), K);
    CHECK(std::abs(r.rm_excess) <= 1e-12);
    CHECK(r.weyl_norm <= 1e-12);
    CHECK(r.traceless_rc_norm <= 1e-12);
  }
  CHECK(constant_curvature_residual(space_form_curvature(3, 0.0), 1.0).rm_excess == doctest::Approx(-12.0));

  const auto prod = chart_of(ModelKind::ProductSphereLine, 1.0);
  const CurvatureData cd = curvature_at(*prod, std::vector<double>{0.3, 0.2, 0.1});
  CHECK(cd.sc == doctest::Approx(2.0).epsilon(1e-6));
  const auto r = constant_curvature_residual(cd, 0.0);
  CHECK(std::max(r.weyl_norm, r.traceless_rc_norm) > 0.1);
  CHECK_THROWS_AS(constant_curvature_residual(space_form_curvature(2, 1.0), 1.0), Error);
}

TEST_CASE("pipeline on model spaces") {
  const std::vector<std::vector<double>> pts{{0.0, 0.0, 0.0}, {0.2, -0.1, 0.15}};
  const std::vector<double> betas{1e-3, 1e-2};

  const RigidityReport s3 = theorem_1_1_pipeline(chart_of(ModelKind::SpaceForm, 1.0), pts, 1.0, betas);
  CHECK(s3.verdict == Verdict::ConsistentWithRigidity);
  CHECK(s3.violations.empty());
  for (const Check& c : s3.checks) CHECK(std::abs(c.margin) < 1e-6);

  const RigidityReport flat = theorem_1_1_pipeline(chart_of(ModelKind::Flat, 0.0), pts, 1.0, betas);
  CHECK(flat.verdict == Verdict::HypothesisViolated);
  bool saw = false;
  for (const Check& c : flat.checks)
    if (c.name == "scalar_lower_bound") {
      CHECK(c.margin == doctest::Approx(-6.0));
      saw = true;
    }
  CHECK(saw);
  CHECK(to_string(flat.verdict) == "hypothesis_violated");

  const RigidityReport prod = theorem_1_1_pipeline(chart_of(ModelKind::ProductSphereLine, 1.0), pts, 0.0, {});
  CHECK(prod.verdict == Verdict::Inconclusive);
}

TEST_CASE("conformal bump localizes violations") {
  Perturbation p;
  p.epsilon = 0.05;
  p.sigma = 0.5;
  const auto c = chart_of(ModelKind::ConformalFlat, 0.0, p);
  const std::vector<std::vector<double>> pts{{0.0, 0.0, 0.0}, {0.2, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 1.2, 0.0}};
  PipelineOptions opts;
  opts.extended = true;
  const RigidityReport rep = theorem_1_1_pipeline(c, pts, 0.0, {}, opts);
  CHECK(rep.verdict == Verdict::HypothesisViolated);
  for (const Check& ck : rep.checks) {
    if (ck.name != "scalar_lower_bound") continue;
    const double r = std::hypot(ck.point[0], ck.point[1], ck.point[2]);
    CHECK(ck.holds == (r < std::sqrt(3.0) * p.sigma));
  }
}
