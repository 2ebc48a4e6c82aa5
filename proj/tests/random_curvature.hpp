#pragma once

#include <random>

#include "curvex/tensor.hpp"

namespace testutil {

inline curvex::Sym2 random_sym(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  curvex::Sym2 s(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) s.set(i, j, g(rng));
  return s;
}

inline curvex::Tensor4 random_tensor4(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  curvex::Tensor4 t(n);
  for (auto& v : t.data()) v = g(rng);
  return t;
}

// Weyl-type part: project a sum of Kulkarni-Nomizu squares onto the
// totally trace-free subspace by subtracting its Ricci contributions.
inline curvex::Tensor4 random_weyl(int n, std::mt19937_64& rng) {
  using namespace curvex;
  Tensor4 r(n);
  for (int k = 0; k < 3; ++k) {
    const Sym2 a = random_sym(n, rng), b = random_sym(n, rng);
    r += kulkarni_nomizu(a, b);
  }
  // W = R - (1/(n-2)) Rc⊙g + Sc/(2(n-1)(n-2)) g⊙g, done by hand
  Sym2 rc(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += r(i, k, j, k);
      rc.set(i, j, s);
    }
  const Sym2 g = Sym2::identity(n);
  Tensor4 w = r - (1.0 / (n - 2)) * kulkarni_nomizu(rc, g);
  w += (rc.trace() / (2.0 * (n - 1) * (n - 2))) * kulkarni_nomizu(g, g);
  return w;
}

inline curvex::AlgebraicCurvature random_curvature(int n, std::mt19937_64& rng) {
  using namespace curvex;
  Tensor4 r = kulkarni_nomizu(random_sym(n, rng), Sym2::identity(n));
  if (n >= 4) r += random_weyl(n, rng);
  else {
    const Sym2 a = random_sym(n, rng), b = random_sym(n, rng);
    r += kulkarni_nomizu(a, b);
  }
  return AlgebraicCurvature(r);
}

}  // namespace testutil
