#include "test_main.hpp"

#include <cmath>
#include <numbers>

#include "curvex/charts.hpp"

using namespace curvex;

namespace {

constexpr double kPi = std::numbers::pi;

ModelSpec spec_of(ModelKind kind, int n, double K) {
  ModelSpec s;
  s.kind = kind;
  s.n = n;
  s.K = K;
  return s;
}

ModelSpec bump(int n, double eps) {
  ModelSpec s = spec_of(ModelKind::ConformalFlat, n, 0.0);
  s.perturbation = Perturbation{eps, 1.0, {}};
  return s;
}

// Point of the model space (sphere or hyperboloid) for normal coordinates x at the pole.
std::vector<double> embed(double K, std::span<const double> x) {
  double r = 0.0;
  for (double c : x) r += c * c;
  r = std::sqrt(r);
  std::vector<double> P(x.size() + 1);
  P[0] = cs_k(K, r);
  for (size_t i = 0; i < x.size(); ++i) P[i + 1] = r == 0.0 ? 0.0 : sn_k(K, r) * x[i] / r;
  return P;
}

double model_distance(double K, std::span<const double> x, std::span<const double> y) {
  const auto P = embed(K, x), Q = embed(K, y);
  double ip = K > 0 ? P[0] * Q[0] : -P[0] * Q[0];
  for (size_t i = 1; i < P.size(); ++i) ip += std::abs(K) * P[i] * Q[i];
  if (K > 0) return std::acos(std::clamp(ip, -1.0, 1.0)) / std::sqrt(K);
  return std::acosh(std::max(1.0, -ip)) / std::sqrt(-K);
}

double max_diff(const Tensor4& a, const Tensor4& b) { return (a - b).max_abs(); }

}  // namespace

TEST_CASE("catalog metrics") {
  const MetricChart flat = make_chart(spec_of(ModelKind::Flat, 3, 0.0));
  const std::vector<double> x{0.3, -1.2, 2.0};
  CHECK((flat.metric(x) - Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);

  const MetricChart sphere = make_chart(spec_of(ModelKind::SpaceForm, 3, 1.0));
  const std::vector<double> y{kPi / 2, 0.0, 0.0};
  const Eigen::MatrixXd g = sphere.metric(y);
  CHECK(g(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g(1, 1) == doctest::Approx(std::pow(2.0 / kPi, 2)).epsilon(1e-13));
  CHECK(g(2, 2) == doctest::Approx(std::pow(2.0 / kPi, 2)).epsilon(1e-13));

  // both branches of the radial function agree
  for (double K : {-1.0, 1.0}) {
    const MetricChart c = make_chart(spec_of(ModelKind::SpaceForm, 2, K));
    for (double r : {0.1, 1.0, 2.5}) {
      const std::vector<double> p{r * 0.6, r * 0.8};
      const double expect = std::pow(sn_k(K, r) / r, 2);
      const Eigen::MatrixXd m = c.metric(p);
      // tangential direction (-0.8, 0.6)
      const double tang = 0.64 * m(0, 0) - 2 * 0.48 * m(0, 1) + 0.36 * m(1, 1);
      CHECK(tang == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  const MetricChart zero = make_chart(bump(3, 0.0));
  CHECK((zero.metric(x) - Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);

  ModelSpec bad = spec_of(ModelKind::SpaceForm, 3, 1.0);
  bad.radius = 3.2;
  CHECK_THROWS_AS(make_chart(bad), Error);
}

TEST_CASE("curvature of catalog charts") {
  const std::vector<double> x{0.3, -0.2, 0.4};
  const CurvatureData f = curvature_at(make_chart(spec_of(ModelKind::Flat, 3, 0.0)), x);
  CHECK(f.rm.tensor().max_abs() == 0.0);
  CHECK(f.sc == 0.0);

  for (double K : {1.0, -1.0, 0.25}) {
    const MetricChart c = make_chart(spec_of(ModelKind::SpaceForm, 3, K));
    const CurvatureData a = curvature_at(c, x);
    CHECK(a.sc == doctest::Approx(6.0 * K));
    CHECK(a.rm_norm2() == doctest::Approx(12.0 * K * K));
    const CurvatureData gen = curvature_generic(c, x);
    CHECK(gen.sc == doctest::Approx(6.0 * K).epsilon(1e-6));
    CHECK(gen.rm_norm2() == doctest::Approx(12.0 * K * K).epsilon(1e-6));
    CHECK(max_diff(gen.rm.tensor(), a.rm.tensor()) < 1e-8);
    CHECK(std::abs(*gen.lap_sc) < 1e-5);
    CHECK(gen.hess_rc->max_abs() < 1e-4);
    CHECK(gen.grad_rc->max_abs() < 1e-7);
  }
}

TEST_CASE("generic curvature on the product and on a conformal bump") {
  const MetricChart prod = make_chart(spec_of(ModelKind::ProductSphereLine, 3, 1.0));
  const std::vector<double> x{0.2, -0.3, 0.5};
  const CurvatureData a = curvature_at(prod, x), g = curvature_generic(prod, x);
  CHECK(a.sc == doctest::Approx(2.0));
  CHECK(g.sc == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(max_diff(a.rm.tensor(), g.rm.tensor()) < 1e-8);

  for (int n : {3, 4}) {
    const MetricChart c = make_chart(bump(n, 0.3));
    std::vector<double> p(static_cast<size_t>(n), 0.0);
    p[0] = 0.4;
    p[1] = -0.25;
    const CurvatureData an = curvature_at(c, p), gen = curvature_generic(c, p);
    CHECK(gen.sc == doctest::Approx(an.sc).epsilon(1e-8));
    CHECK(max_diff(an.rm.tensor(), gen.rm.tensor()) < 1e-8);
    CHECK(*gen.lap_sc == doctest::Approx(*an.lap_sc).epsilon(1e-5));
    CHECK(max_diff(*gen.hess_rc, *an.hess_rc) < 1e-4);
    for (int i = 0; i < n; ++i)
      CHECK(gen.grad_sc[static_cast<size_t>(i)] ==
            doctest::Approx(an.grad_sc[static_cast<size_t>(i)]).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("conformal bump at its centre") {
  for (int n : {3, 4}) {
    const double eps = 0.3;
    const MetricChart c = make_chart(bump(n, eps));
    const std::vector<double> o(static_cast<size_t>(n), 0.0);
    const CurvatureData cd = curvature_at(c, o);
    const double nn = n * (n - 1.0);
    // φ = ε e^{-r²/2}: ∇²φ(0) = -ε δ, dφ(0) = 0
    CHECK(cd.sc == doctest::Approx(2.0 * nn * eps * std::exp(-2 * eps)).epsilon(1e-12));
    CHECK(cd.rm_norm2() == doctest::Approx(2.0 * cd.sc * cd.sc / nn).epsilon(1e-10));
    CHECK(*cd.lap_sc ==
          doctest::Approx(-2.0 * nn * (n + 2.0) * eps * (1 - eps) * std::exp(-4 * eps)).epsilon(1e-6));
  }
}

TEST_CASE("curvature vanishes linearly with the bump amplitude") {
  const std::vector<double> p{0.3, 0.1, -0.2};
  double prev = 0.0;
  for (double eps : {1e-2, 5e-3, 2.5e-3}) {
    const double s = curvature_at(make_chart(bump(3, eps)), p).rm_norm2();
    const double amp = std::sqrt(s) / eps;
    if (prev > 0) CHECK(amp == doctest::Approx(prev).epsilon(0.02));
    prev = amp;
  }
}

TEST_CASE("normal charts") {
  auto flat = std::make_shared<const MetricChart>(make_chart(spec_of(ModelKind::Flat, 3, 0.0)));
  const NormalChart nf = build_normal_chart(flat, {1.0, 2.0, -1.0}, 1.0);
  CHECK(nf.method() == NormalChart::Method::Translation);
  const std::vector<double> x{0.1, 0.2, -0.3};
  const auto e = nf.exp(x);
  CHECK(e[0] == doctest::Approx(1.1));
  CHECK(nf.density(x) == 1.0);

  auto sph = std::make_shared<const MetricChart>(make_chart(spec_of(ModelKind::SpaceForm, 3, 1.0)));
  const NormalChart ns = build_normal_chart(sph, {0.0, 0.0, 0.0}, 1.5);
  CHECK(ns.method() == NormalChart::Method::ClosedFormSpaceForm);
  const double r = std::sqrt(0.14);
  CHECK(ns.density(x) == doctest::Approx(std::pow(std::sin(r) / r, 2)).epsilon(1e-14));
  CHECK_THROWS_AS(build_normal_chart(sph, {0.0, 0.0, 0.0}, 3.2), Error);
}

TEST_CASE("shooting on space forms off the pole") {
  for (double K : {1.0, -1.0}) {
    auto c = std::make_shared<const MetricChart>(make_chart(spec_of(ModelKind::SpaceForm, 3, K)));
    const std::vector<double> p{0.4, -0.3, 0.2};
    const NormalChart nc = build_normal_chart(c, p, 1.0);
    CHECK(nc.method() == NormalChart::Method::Shooting);
    for (const auto& x : {std::vector<double>{0.3, 0.4, -0.5}, std::vector<double>{-0.1, 0.05, 0.2},
                          std::vector<double>{0.0, 0.0, 0.9}}) {
      const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
      const NormalSample s = nc.sample(x);
      // homogeneity: the density matches the one at the pole
      CHECK(s.density == doctest::Approx(std::pow(sn_k(K, r) / r, 2)).epsilon(1e-9));
      // Gauss lemma against the distance of the embedded model
      CHECK(model_distance(K, p, s.point) == doctest::Approx(r).epsilon(1e-9));
      const Eigen::MatrixXd gt = s.ginv.inverse();
      Eigen::Vector3d u(x[0] / r, x[1] / r, x[2] / r);
      CHECK(u.dot(gt * u) == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("density series") {
  const DensitySeries fs = density_series(space_form_curvature(3, 0.0));
  CHECK(fs.order2.norm2() == 0.0);
  CHECK(fs.order4->max_abs() == 0.0);
  const DensitySeries ss = density_series(space_form_curvature(3, 2.0));
  CHECK(ss.order2(0, 0) == doctest::Approx(-2.0 * 2.0 / 6.0));
  CHECK(ss.order2(0, 1) == 0.0);

  // fit density(s e) = 1 + c2 s² + c4 s⁴ + c6 s⁶ along directions on the sphere
  auto sph = std::make_shared<const MetricChart>(make_chart(spec_of(ModelKind::SpaceForm, 3, 1.0)));
  const NormalChart nc = build_normal_chart(sph, {0.0, 0.0, 0.0}, 1.0);
  const DensitySeries ds = density_series(space_form_curvature(3, 1.0));
  const double dir[3] = {0.6, 0.0, 0.8};
  Eigen::MatrixXd A(12, 4);
  Eigen::VectorXd b(12);
  for (int k = 0; k < 12; ++k) {
    const double s = 0.02 + 0.02 * k;
    const std::vector<double> x{s * dir[0], s * dir[1], s * dir[2]};
    A(k, 0) = s * s;
    A(k, 1) = std::pow(s, 4);
    A(k, 2) = std::pow(s, 6);
    A(k, 3) = std::pow(s, 8);
    b(k) = nc.density(x) - 1.0;
  }
  const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(b);
  double q2 = 0.0, q4 = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      q2 += ds.order2(i, j) * dir[i] * dir[j];
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) q4 += (*ds.order4)(i, j, k, l) * dir[i] * dir[j] * dir[k] * dir[l];
    }
  CHECK(std::abs(coef(0) - q2) < 1e-6);
  CHECK(std::abs(coef(1) - q4) < 1e-6);
}

TEST_CASE("shot density starts as 1 - Rc/6 on a conformal bump") {
  auto c = std::make_shared<const MetricChart>(make_chart(bump(3, 0.3)));
  const std::vector<double> p{0.3, -0.2, 0.1};
  const NormalChart nc = build_normal_chart(c, p, 0.5);
  const CurvatureData cd = curvature_at(*c, p);
  // second directional derivatives of the density by symmetric differences
  const double h = 0.02;
  const double dirs[4][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.6, 0.8, 0}};
  for (const auto& d : dirs) {
    auto dens = [&](double s) {
      const std::vector<double> x{s * d[0], s * d[1], s * d[2]};
      return nc.density(x);
    };
    CHECK(dens(0.0) == 1.0);
    const double d2h = (dens(h) - 2.0 + dens(-h)) / (h * h);
    const double d2h2 = (dens(h / 2) - 2.0 + dens(-h / 2)) / (h * h / 4);
    const double second = (4.0 * d2h2 - d2h) / 3.0;
    double rc = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) rc += cd.rc(i, j) * d[i] * d[j];
    CHECK(0.5 * second == doctest::Approx(-rc / 6.0).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("errors") {
  const MetricChart flat = make_chart(spec_of(ModelKind::Flat, 3, 0.0));
  const std::vector<double> far{20.0, 0.0, 0.0};
  CHECK_THROWS_AS(curvature_at(flat, far), Error);
  auto sp = std::make_shared<const MetricChart>(make_chart(spec_of(ModelKind::SpaceForm, 3, 1.0)));
  try {
    build_normal_chart(sp, {2.0, 0.0, 0.0}, 1.0);
    FAIL("expected OutOfDomain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OutOfDomain);
  }
}
