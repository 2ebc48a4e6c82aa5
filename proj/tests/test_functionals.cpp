#include "test_main.hpp"

#include <cmath>
#include <numbers>

#include "curvex/functionals.hpp"

using namespace curvex;

namespace {

constexpr double kPi = std::numbers::pi;

std::shared_ptr<const MetricChart> chart_of(ModelKind kind, int n, double K) {
  ModelSpec s;
  s.kind = kind;
  s.n = n;
  s.K = K;
  return std::make_shared<const MetricChart>(make_chart(s));
}

std::shared_ptr<const NormalChart> normal_at(std::shared_ptr<const MetricChart> c, std::vector<double> p, double r0) {
  return std::make_shared<const NormalChart>(build_normal_chart(std::move(c), std::move(p), r0));
}

std::shared_ptr<const NormalChart> pole(ModelKind kind, int n, double K, double r0) {
  return normal_at(chart_of(kind, n, K), std::vector<double>(static_cast<size_t>(n), 0.0), r0);
}

QuadratureSpec product(int order = 40) {
  QuadratureSpec q;
  q.order = order;
  return q;
}

QuadratureSpec radial(int order = 60, int res = 8) {
  QuadratureSpec q;
  q.rule = QuadRule::RadialSphere;
  q.order = order;
  q.sphere_resolution = res;
  return q;
}

}  // namespace

TEST_CASE("cutoff profile") {
  CHECK(cutoff_profile(0.3) == 1.0);
  CHECK(cutoff_profile(1.2) == 0.0);
  CHECK(cutoff_profile(0.75) == doctest::Approx(0.5));
  for (double s : {0.55, 0.7, 0.9}) {
    const double h = 1e-6;
    CHECK(cutoff_derivative(s) == doctest::Approx((cutoff_profile(s + h) - cutoff_profile(s - h)) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("test function construction") {
  const auto flat = pole(ModelKind::Flat, 3, 0.0, 2.0);
  const TestFunction f = build_test_function(flat, AMode::Optimal, std::nullopt, 0.0, 1.5);
  CHECK(f.a.norm2() == 0.0);
  const double x[3] = {0.2, 0.1, 0.0};
  CHECK(f.eta2(x, 0.01, nullptr) == 1.0);

  const auto sph = pole(ModelKind::SpaceForm, 3, 2.0, 1.5);
  const TestFunction s = build_test_function(sph, AMode::Optimal, std::nullopt, 0.0, 1.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(s.a(i, j) == doctest::Approx(i == j ? 4.0 / 3.0 : 0.0));

  CHECK_THROWS_AS(build_test_function(flat, AMode::Optimal, std::nullopt, 0.0, 2.5), Error);
  const auto hyp = pole(ModelKind::SpaceForm, 3, -1.0, 2.5);
  CHECK(build_test_function(hyp, AMode::Optimal, std::nullopt, 0.0, 2.0).positivity_violated);
  CHECK_FALSE(build_test_function(hyp, AMode::Optimal, std::nullopt, 0.0, 1.0).positivity_violated);

  // gradient against finite differences
  const Sym2 a = Sym2::diagonal({0.5, -0.2, 0.3});
  const TestFunction g = build_test_function(flat, AMode::Custom, a, 0.7, 1.0);
  const double y[3] = {0.4, 0.3, -0.2};
  double grad[3];
  g.eta2(y, 0.01, grad);
  for (int i = 0; i < 3; ++i) {
    double yp[3] = {y[0], y[1], y[2]}, ym[3] = {y[0], y[1], y[2]};
    yp[i] += 1e-6;
    ym[i] -= 1e-6;
    CHECK(grad[i] == doctest::Approx((g.eta2(yp, 0.01, nullptr) - g.eta2(ym, 0.01, nullptr)) / 2e-6).epsilon(1e-7));
  }
}

TEST_CASE("flat log-Sobolev equality") {
  const auto flat = pole(ModelKind::Flat, 3, 0.0, 2.0);
  const TestFunction f = build_test_function(flat, AMode::Optimal, std::nullopt, 0.0, 1.5);
  for (double t : {1e-3, 4e-3}) {
    const FunctionalValue v = eval_L(f, t, product());
    CHECK(std::abs(v.value) < 1e-12);
    CHECK(v.components.mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.value == doctest::Approx(reconstruct_L(v.components, 3, t)).epsilon(1e-13).scale(1.0));
    const FunctionalValue w = eval_W(f, t, product());
    CHECK(w.value == v.value);
  }
  const double t = 0.01;
  TestFunction wide = build_test_function(pole(ModelKind::Flat, 3, 0.0, 5.0), AMode::Optimal, std::nullopt, 0.0, 4.0);
  const double ent = entropy_integral(wide, t, product());
  CHECK(ent == doctest::Approx(-1.5 - 1.5 * std::log(0.04 * kPi)).epsilon(1e-12));
}

TEST_CASE("scale covariance") {
  const auto sph = pole(ModelKind::SpaceForm, 3, 1.0, 2.5);
  const TestFunction f = build_test_function(sph, AMode::Optimal, std::nullopt, -2.0, 2.0);
  TestFunction g = f;
  const double t = 2e-3;
  const auto base = eval_L(f, t, product(30));
  const auto baseW = eval_W(f, t, product(30));
  for (double c : {2.0, 0.5, 1.7}) {
    g.amplitude = c;
    const auto sL = eval_L(g, t, product(30));
    const auto sW = eval_W(g, t, product(30));
    CHECK(sL.value == doctest::Approx(c * c * base.value).epsilon(1e-12));
    CHECK(sW.value == doctest::Approx(c * c * baseW.value).epsilon(1e-12));
    const double expect_ent = c * c * (base.components.entropy + base.components.mass * std::log(c * c));
    CHECK(sL.components.entropy == doctest::Approx(expect_ent).epsilon(1e-12));
  }
}

TEST_CASE("space form slopes") {
  const auto sph = pole(ModelKind::SpaceForm, 3, 1.0, 2.5);
  const TestFunction f = build_test_function(sph, AMode::Optimal, std::nullopt, -2.0, 2.0);
  const double t = 0.005;
  CHECK(eval_L(f, t, product()).value / t == doctest::Approx(-6.0).epsilon(0.01));
  CHECK(std::abs(eval_W(f, t, product()).value / t) < 0.05);
  // normalized class keeps unit mass to O(t²)
  for (double s : {2e-3, 1e-3}) CHECK(std::abs(eval_L(f, s, product()).components.mass - 1.0) < 20 * s * s);

  // entropy slope with a = 2/3 δ, α = 0 is -3·2 + (5/6)·6 = -1
  const TestFunction g = build_test_function(sph, AMode::Optimal, std::nullopt, 0.0, 2.0);
  auto reduced = [&](double s) {
    const auto v = eval_L(g, s, product());
    return (v.components.entropy + 1.5 + 1.5 * std::log(4 * kPi * s) * v.components.mass) / s;
  };
  const double s1 = reduced(1e-3), s2 = reduced(5e-4);
  CHECK(2.0 * s2 - s1 == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("parallel kernel matches serial reference bitwise") {
  const auto sph = pole(ModelKind::SpaceForm, 3, 1.0, 2.5);
  const TestFunction f = build_test_function(sph, AMode::Optimal, std::nullopt, -2.0, 2.0);
  for (const auto& q : {product(30), radial(40, 6)}) {
    const auto a = eval_W(f, 2e-3, q, ExecPolicy::Parallel);
    const auto b = eval_W(f, 2e-3, q, ExecPolicy::Serial);
    CHECK(a.value == b.value);
    CHECK(a.components.entropy == b.components.entropy);
    CHECK(a.components.dirichlet == b.components.dirichlet);
  }
}

TEST_CASE("rules agree and shooting matches the closed form") {
  const auto sph = pole(ModelKind::SpaceForm, 3, 1.0, 2.5);
  const Sym2 a = Sym2::diagonal({0.9, 0.5, 0.2});
  const TestFunction f = build_test_function(sph, AMode::Custom, a, 0.3, 2.0);
  const double t = 2e-3;
  const auto p = eval_W(f, t, product());
  const auto r = eval_W(f, t, radial(60, 8));
  CHECK(p.value == doctest::Approx(r.value).epsilon(1e-11).scale(1.0));

  // the sphere is homogeneous: normal coordinates off the pole give the same numbers
  const auto off = normal_at(chart_of(ModelKind::SpaceForm, 3, 1.0), {0.3, -0.2, 0.1}, 1.0);
  const TestFunction g = build_test_function(off, AMode::Optimal, std::nullopt, -2.0, 0.9);
  const TestFunction h = build_test_function(pole(ModelKind::SpaceForm, 3, 1.0, 1.0), AMode::Optimal, std::nullopt, -2.0, 0.9);
  const double ts = 1e-3;
  const auto vg = eval_L(g, ts, radial(40, 4));
  const auto vh = eval_L(h, ts, radial(40, 4));
  CHECK(vg.value == doctest::Approx(vh.value).epsilon(1e-9));
}

TEST_CASE("errors") {
  const auto flat = pole(ModelKind::Flat, 3, 0.0, 2.0);
  const TestFunction f = build_test_function(flat, AMode::Optimal, std::nullopt, 0.0, 1.0);
  try {
    eval_L(f, 0.05, product());
    FAIL("expected TimeTooLarge");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TimeTooLarge);
  }
  QuadratureSpec bad;
  bad.order = 5;
  CHECK_THROWS_AS(eval_L(f, 1e-3, bad), Error);
}

TEST_CASE("ball volumes") {
  QuadratureSpec q = radial(40, 8);
  q.target_tol = 1e-12;
  CHECK(ball_volume(*pole(ModelKind::Flat, 3, 0.0, 2.0), 1.0, q) == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-13));
  const auto s3 = pole(ModelKind::SpaceForm, 3, 1.0, 2.5);
  CHECK(ball_volume(*s3, 1.0, q) == doctest::Approx(kPi * (2.0 - std::sin(2.0))).epsilon(1e-12));
  CHECK(model_ball_volume(3, 1.0, 1.0) == doctest::Approx(kPi * (2.0 - std::sin(2.0))).epsilon(1e-13));
  for (double r : {0.3, 1.2, 2.0})
    CHECK(ball_volume(*s3, r, q) == doctest::Approx(model_ball_volume(3, 1.0, r)).epsilon(1e-9));
  // hyperbolic plane: 2π(cosh r − 1)
  const auto h2 = pole(ModelKind::SpaceForm, 2, -1.0, 3.0);
  CHECK(ball_volume(*h2, 2.0, q) == doctest::Approx(2 * kPi * (std::cosh(2.0) - 1.0)).epsilon(1e-12));
  CHECK(ball_volume(*s3, 0.01, q) / (4.0 * kPi / 3.0 * 1e-6) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("Bishop-Gromov ratios") {
  QuadratureSpec q = radial(40, 6);
  const std::vector<double> radii{0.2, 0.5, 0.9, 1.4, 2.0};
  for (double v : bishop_gromov_ratio(*pole(ModelKind::SpaceForm, 3, 1.0, 2.5), 1.0, radii, q))
    CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : bishop_gromov_ratio(*pole(ModelKind::Flat, 3, 0.0, 2.5), 0.0, radii, q))
    CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  const auto dec = bishop_gromov_ratio(*pole(ModelKind::Flat, 3, 0.0, 2.5), -1.0, radii, q);
  for (size_t i = 1; i < dec.size(); ++i) CHECK(dec[i] < dec[i - 1]);
}

TEST_CASE("shot normal chart on a conformal bump") {
  ModelSpec s;
  s.kind = ModelKind::ConformalFlat;
  s.n = 3;
  s.perturbation = Perturbation{0.2, 1.0, {}};
  const auto c = std::make_shared<const MetricChart>(make_chart(s));
  const auto nc = normal_at(c, {0.0, 0.0, 0.0}, 1.2);
  const TestFunction f = build_test_function(nc, AMode::Optimal, std::nullopt, 0.0, 1.2);
  const CurvatureData cd = curvature_at(*c, std::vector<double>{0.0, 0.0, 0.0});
  const double t = 1e-3;
  const auto v = eval_L(f, t, radial(40, 3));
  CHECK(v.value / t == doctest::Approx(-cd.sc).epsilon(0.01));
}
