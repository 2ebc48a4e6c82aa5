#include "test_main.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "curvex/moments.hpp"
#include "curvex/quadrature.hpp"
#include "random_curvature.hpp"

using namespace curvex;

namespace {

// 1-D moment of the normalized Gaussian with variance 2t by adaptive Gauss-Kronrod.
double moment_1d(int k, double t) {
  auto f = [&](double x) { return std::pow(x, k) * std::exp(-x * x / (4 * t)) / std::sqrt(4 * std::numbers::pi * t); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 15, 1e-14);
}

struct Oracle {
  int n;
  double t;
  std::vector<std::vector<double>> table;  // table[i][k]
  Oracle(int dim, double time) : n(dim), t(time) {
    std::vector<double> m;
    for (int k = 0; k <= 8; ++k) m.push_back(moment_1d(k, t));
    table.assign(static_cast<size_t>(n), m);
  }
  double monomial(const std::vector<int>& e) const {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= table[static_cast<size_t>(i)][static_cast<size_t>(e[static_cast<size_t>(i)])];
    return r;
  }
  // Σ over index tuples, optionally carrying the extra |x|²/t
  double quadratic(const Sym2& A, bool weighted) const {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (!weighted) {
          std::vector<int> e(static_cast<size_t>(n), 0);
          ++e[static_cast<size_t>(i)];
          ++e[static_cast<size_t>(j)];
          s += A(i, j) * monomial(e);
          continue;
        }
        for (int m = 0; m < n; ++m) {
          std::vector<int> e(static_cast<size_t>(n), 0);
          ++e[static_cast<size_t>(i)];
          ++e[static_cast<size_t>(j)];
          e[static_cast<size_t>(m)] += 2;
          s += A(i, j) * monomial(e) / t;
        }
      }
    return s;
  }
  double quartic(const Tensor4& l, bool weighted) const {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int q = 0; q < n; ++q) {
            std::vector<int> e(static_cast<size_t>(n), 0);
            ++e[static_cast<size_t>(i)];
            ++e[static_cast<size_t>(j)];
            ++e[static_cast<size_t>(k)];
            ++e[static_cast<size_t>(q)];
            if (!weighted) {
              s += l(i, j, k, q) * monomial(e);
              continue;
            }
            for (int m = 0; m < n; ++m) {
              auto f = e;
              f[static_cast<size_t>(m)] += 2;
              s += l(i, j, k, q) * monomial(f) / t;
            }
          }
    return s;
  }
};

}  // namespace

TEST_CASE("closed-form values") {
  CHECK(moment_radial(GaussianWeight(3, 0.2)) == 6.0);
  CHECK(moment_radial(GaussianWeight(2, 0.2)) == 4.0);
  const GaussianWeight w(3, 0.1);
  CHECK(moment_quadratic(w, Sym2::identity(3), false) == doctest::Approx(0.6));
  CHECK(moment_quadratic(w, Sym2::identity(3), true) == doctest::Approx(6.0));
  Sym2 tl = Sym2::diagonal({1.0, -0.5, -0.5});
  CHECK(moment_quadratic(w, tl, false) == 0.0);
  CHECK(moment_quadratic(w, tl, true) == 0.0);
  CHECK(moment_quartic(w, Tensor4(3), false) == 0.0);
  Tensor4 l(2);
  l(0, 0, 0, 0) = 1.0;
  CHECK(moment_quartic(GaussianWeight(2, 1.0), l, false) == doctest::Approx(12.0));
  CHECK_THROWS_AS(moment_quadratic(w, Sym2::identity(2), false), Error);
  CHECK_THROWS_AS(GaussianWeight(3, 0.0), Error);
}

TEST_CASE("weighted over unweighted quartic ratio") {
  std::mt19937_64 rng(2);
  for (int n = 2; n <= 5; ++n) {
    const Tensor4 l = testutil::random_tensor4(n, rng);
    const GaussianWeight w(n, 0.3);
    CHECK(moment_quartic(w, l, true) / moment_quartic(w, l, false) == doctest::Approx(2.0 * (n + 4)));
  }
}

TEST_CASE("wick moments") {
  const std::vector<int> zero{0, 0, 0};
  CHECK(wick_moment(GaussianWeight(3, 0.7), zero) == 1.0);
  const std::vector<int> two{2, 0, 0}, four{4, 0, 0}, odd{1, 2, 0};
  CHECK(wick_moment(GaussianWeight(3, 0.5), two) == doctest::Approx(1.0));
  CHECK(wick_moment(GaussianWeight(3, 1.0), four) == doctest::Approx(12.0));
  CHECK(wick_moment(GaussianWeight(3, 1.0), odd) == 0.0);
  for (double t : {0.01, 0.1}) {
    const Oracle o(3, t);
    for (const auto& e : {std::vector<int>{2, 2, 0}, std::vector<int>{4, 0, 2}, std::vector<int>{2, 2, 2},
                          std::vector<int>{6, 0, 0}})
      CHECK(wick_moment(GaussianWeight(3, t), e) == doctest::Approx(o.monomial(e)).epsilon(1e-12));
  }
}

TEST_CASE("sphere monomials") {
  const std::vector<int> odd{1, 0, 0}, four{4, 0, 0};
  CHECK(sphere_monomial(3, odd) == 0.0);
  CHECK(sphere_monomial(3, four) == doctest::Approx(4.0 * std::numbers::pi / 5.0).epsilon(1e-14));
  const double pi32 = std::pow(std::numbers::pi, 1.5);
  CHECK(sphere_monomial(3, four) == doctest::Approx(3.0 * pi32 / (5.0 * std::tgamma(2.5))).epsilon(1e-14));
  for (int n = 2; n <= 6; ++n) {
    std::vector<int> e(static_cast<size_t>(n), 0);
    e[0] = 2;
    CHECK(sphere_monomial(n, e) == doctest::Approx(quad::sphere_area(n) / n).epsilon(1e-13));
  }
  // spherical quadrature oracle on S², exact for degree < 2*resolution
  const auto rule = quad::sphere_rule(3, 8);
  for (const auto& e : {std::vector<int>{4, 0, 0}, std::vector<int>{2, 2, 0}, std::vector<int>{2, 2, 2},
                        std::vector<int>{0, 6, 2}}) {
    double s = 0.0;
    for (size_t k = 0; k < rule.size(); ++k) {
      const double* y = rule.direction(k);
      s += rule.weights[k] * std::pow(y[0], e[0]) * std::pow(y[1], e[1]) * std::pow(y[2], e[2]);
    }
    CHECK(sphere_monomial(3, e) == doctest::Approx(s).epsilon(1e-13));
  }
  // ∫ y_i⁴ = 3 ∫ y_i² y_j²
  const std::vector<int> mixed{2, 2, 0, 0};
  const std::vector<int> quart{4, 0, 0, 0};
  CHECK(sphere_monomial(4, quart) == doctest::Approx(3.0 * sphere_monomial(4, mixed)));
}

TEST_CASE("identities against an adaptive one-dimensional oracle") {
  std::mt19937_64 rng(41);
  for (int n = 2; n <= 4; ++n)
    for (double t : {0.01, 0.1}) {
      const Oracle o(n, t);
      const GaussianWeight w(n, t);
      std::vector<int> zero(static_cast<size_t>(n), 0);
      CHECK(o.monomial(zero) == doctest::Approx(1.0).epsilon(1e-12));
      double rad = 0.0;
      for (int i = 0; i < n; ++i) {
        auto e = zero;
        e[static_cast<size_t>(i)] = 2;
        rad += o.monomial(e) / t;
      }
      CHECK(moment_radial(w) == doctest::Approx(rad).epsilon(1e-12));
      for (int trial = 0; trial < 5; ++trial) {
        const Sym2 A = testutil::random_sym(n, rng);
        const Tensor4 l = testutil::random_tensor4(n, rng);
        for (bool weighted : {false, true}) {
          CHECK(moment_quadratic(w, A, weighted) ==
                doctest::Approx(o.quadratic(A, weighted)).epsilon(1e-11).scale(t));
          CHECK(moment_quartic(w, l, weighted) ==
                doctest::Approx(o.quartic(l, weighted)).epsilon(1e-11).scale(t * t));
        }
      }
    }
}

TEST_CASE("product Gauss-Hermite expectation") {
  const GaussianWeight w(3, 0.1);
  auto one = [](std::span<const double>) { return 1.0; };
  CHECK(gaussian_expectation(w, one, 20) == doctest::Approx(1.0).epsilon(1e-14));
  auto r2 = [](std::span<const double> x) { return (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.1; };
  CHECK(gaussian_expectation(w, r2, 20) == doctest::Approx(6.0).epsilon(1e-13));
}
