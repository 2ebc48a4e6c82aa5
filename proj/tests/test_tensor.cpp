#include "test_main.hpp"

#include <cmath>

#include "curvex/tensor.hpp"
#include "random_curvature.hpp"

using namespace curvex;

namespace {

double brute_e(const Tensor4& l) {
  const int n = l.dim();
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += l(i, i, j, j) + l(i, j, i, j) + l(i, j, j, i);
  return s;
}

double brute_norm2(const Tensor4& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

}  // namespace

TEST_CASE("e_functional basics") {
  CHECK(e_functional(Tensor4(3)) == 0.0);
  Tensor4 l(2);
  l(0, 0, 0, 0) = 1.0;
  CHECK(e_functional(l) == doctest::Approx(3.0));

  std::mt19937_64 rng(7);
  for (int n = 2; n <= 5; ++n) {
    const Sym2 a = testutil::random_sym(n, rng);
    const AlgebraicCurvature rm = testutil::random_curvature(std::max(n, 3), rng);
    if (rm.dim() != n) continue;
    const Sym2 rc = rm.ricci();
    const double expect = a.trace() * rc.trace() + 2.0 * a.dot(rc);
    CHECK(e_functional(outer(a, rc)) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("e_functional is linear") {
  std::mt19937_64 rng(11);
  for (int n = 2; n <= 6; ++n) {
    const Tensor4 a = testutil::random_tensor4(n, rng), b = testutil::random_tensor4(n, rng);
    const double lhs = e_functional(2.5 * a + (-0.75) * b);
    const double rhs = 2.5 * e_functional(a) - 0.75 * e_functional(b);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
    CHECK(e_functional(a) == doctest::Approx(brute_e(a)).epsilon(1e-14));
  }
}

TEST_CASE("kulkarni_nomizu") {
  const Sym2 d = Sym2::identity(3);
  const Tensor4 dd = kulkarni_nomizu(d, d);
  int count = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) {
        CHECK(dd(i, j, i, j) == 2.0);
        ++count;
      }
  CHECK(count == 6);
  // 2n(n-1) nonzero entries of magnitude 2
  CHECK(brute_norm2(dd) == doctest::Approx(48.0));
  CHECK(kulkarni_nomizu(Sym2(3), d).max_abs() == 0.0);

  std::mt19937_64 rng(3);
  for (int n = 2; n <= 6; ++n) {
    const Sym2 h = testutil::random_sym(n, rng), k = testutil::random_sym(n, rng);
    const Tensor4 hk = kulkarni_nomizu(h, k), kh = kulkarni_nomizu(k, h);
    CHECK((hk - kh).max_abs() <= 1e-14 * std::max(1.0, hk.max_abs()));
    CHECK(curvature_symmetry_residual(hk) <= 1e-14 * std::max(1.0, hk.max_abs()));
  }
  CHECK_THROWS_AS(kulkarni_nomizu(Sym2(2), Sym2(3)), Error);
}

TEST_CASE("space form curvature package") {
  for (int n = 2; n <= 6; ++n)
    for (double K : {1.0, -1.0, 0.5}) {
      const CurvatureData c = space_form_curvature(n, K);
      CHECK(c.sc == doctest::Approx(n * (n - 1) * K));
      CHECK(c.rm_norm2() == doctest::Approx(2.0 * n * (n - 1) * K * K));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j) CHECK(c.rm(i, j, i, j) == doctest::Approx(K));
    }
}

TEST_CASE("AlgebraicCurvature rejects broken symmetry") {
  Tensor4 t(3);
  t(0, 1, 0, 1) = 1.0;
  CHECK_THROWS_AS(AlgebraicCurvature(t, 1e-10), Error);
}

TEST_CASE("v_tensor on a space form against a loop-nest oracle") {
  const int n = 3;
  const double K = 0.7;
  const CurvatureData c = space_form_curvature(n, K);
  const Tensor4 v = v_tensor(c);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          auto R = [&](int a, int b, int cc, int d) {
            return K * ((a == cc) * (b == d) - (a == d) * (b == cc));
          };
          double quad = 0.0;
          for (int s = 0; s < n; ++s)
            for (int t = 0; t < n; ++t) quad += R(i, s, j, t) * R(k, s, l, t);
          const double rij = (n - 1) * K * (i == j), rkl = (n - 1) * K * (k == l);
          const double expect = (-(2.0 / 15.0) * quad + rij * rkl / 3.0) / 24.0;
          CHECK(v(i, j, k, l) == doctest::Approx(expect).epsilon(1e-14));
        }
  CHECK(v_tensor(space_form_curvature(4, 0.0)).max_abs() == 0.0);
  CurvatureData no_hess = c;
  no_hess.hess_rc.reset();
  CHECK_THROWS_AS(v_tensor(no_hess), Error);
}

TEST_CASE("E(v) identity with and without a Hessian") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 4;
    CurvatureData c = curvature_from_rm(testutil::random_curvature(n, rng), true);
    const double base = (5.0 * c.sc * c.sc + 8.0 * c.rc_norm2() - 3.0 * c.rm_norm2()) / 360.0;
    CHECK(e_functional(v_tensor(c)) == doctest::Approx(base).epsilon(1e-10));

    Tensor4 h = testutil::random_tensor4(n, rng);
    double lap = 0.0;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) lap += h(i, i, k, k);
    Tensor4 hs(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int l = 0; l < n; ++l) hs(i, j, k, l) = 0.5 * (h(i, j, k, l) + h(j, i, k, l));
    c.hess_rc = hs;
    c.lap_sc = lap;
    // with contracted Bianchi both divergences equal ΔSc/2 and this becomes -18ΔSc/360
    double div_a = 0.0, div_b = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        div_a += hs(i, j, i, j);
        div_b += hs(i, j, j, i);
      }
    const double hess_part = -(3.0 / 5.0) / 24.0 * (lap + div_a + div_b);
    CHECK(e_functional(v_tensor(c)) == doctest::Approx(base + hess_part).epsilon(1e-10));
  }
}

TEST_CASE("weyl decomposition") {
  for (int n = 3; n <= 6; ++n) {
    const auto p = weyl_decompose(space_form_curvature(n, 1.3).rm);
    CHECK(p.traceless_ricci_part.max_abs() <= 1e-14);
    CHECK(p.weyl.max_abs() <= 1e-14);
    CHECK(p.scalar_part.norm2() == doctest::Approx(2.0 * n * (n - 1) * 1.69));
    const auto z = weyl_decompose(space_form_curvature(n, 0.0).rm);
    CHECK(z.scalar_part.max_abs() == 0.0);
    CHECK(z.weyl.max_abs() == 0.0);
  }
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 4;
    Sym2 h = testutil::random_sym(n, rng);
    h -= (h.trace() / n) * Sym2::identity(n);
    Tensor4 r = kulkarni_nomizu(h, Sym2::identity(n));
    if (n >= 4) r += testutil::random_weyl(n, rng);
    const AlgebraicCurvature rm(r);
    const auto p = weyl_decompose(rm);
    const double total = p.scalar_part.norm2() + p.traceless_ricci_part.norm2() + p.weyl.norm2();
    CHECK(std::abs(rm.norm2() - total) <= 1e-12 * rm.norm2());
    CHECK((rm.tensor() - p.scalar_part - p.traceless_ricci_part - p.weyl).max_abs() <= 1e-13);
    CHECK(std::abs(p.scalar_part.dot(p.weyl)) <= 1e-10);
    CHECK(std::abs(p.traceless_ricci_part.dot(p.weyl)) <= 1e-10);
  }
  CHECK_THROWS_AS(weyl_decompose(AlgebraicCurvature(2)), Error);
}

TEST_CASE("constructed curvature satisfies symmetries") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rm = testutil::random_curvature(3 + trial % 4, rng);
    CHECK(rm.symmetry_residual() <= 1e-14 * std::max(1.0, rm.tensor().max_abs()));
  }
}
