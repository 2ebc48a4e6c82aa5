#include "curvex/moments.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "curvex/quadrature.hpp"

namespace curvex {

namespace {

void require_dim(const GaussianWeight& w, int n) {
  if (w.n != n) throw Error(ErrorKind::DimensionMismatch, "moment argument dimension differs from weight");
}

double double_factorial_odd(int k) {  // (k-1)!! for even k
  double r = 1.0;
  for (int j = k - 1; j > 1; j -= 2) r *= j;
  return r;
}

}  // namespace

GaussianWeight::GaussianWeight(int dim, double time) : n(dim), t(time) {
  if (dim < 1) throw Error(ErrorKind::InvalidSpec, "weight dimension must be positive");
  if (!(time > 0.0)) throw Error(ErrorKind::InvalidSpec, "weight time must be positive");
}

double moment_radial(const GaussianWeight& w) { return 2.0 * w.n; }

double moment_quadratic(const GaussianWeight& w, const Sym2& A, bool weighted) {
  require_dim(w, A.dim());
  const double base = 2.0 * A.trace() * w.t;
  return weighted ? 2.0 * (w.n + 2) * base : base;
}

double moment_quartic(const GaussianWeight& w, const Tensor4& lambda, bool weighted) {
  require_dim(w, lambda.dim());
  const double base = 4.0 * e_functional(lambda) * w.t * w.t;
  return weighted ? 2.0 * (w.n + 4) * base : base;
}

double sphere_monomial(int n, std::span<const int> exponents) {
  if (static_cast<int>(exponents.size()) != n) throw Error(ErrorKind::DimensionMismatch, "exponent count");
  double log_num = 0.0;
  int total = 0;
  for (int k : exponents) {
    if (k < 0) throw Error(ErrorKind::InvalidSpec, "negative exponent");
    if (k % 2 != 0) return 0.0;
    log_num += std::lgamma(0.5 * (k + 1));
    total += k;
  }
  return 2.0 * std::exp(log_num - std::lgamma(0.5 * (total + n)));
}

double wick_moment(const GaussianWeight& w, std::span<const int> exponents) {
  if (static_cast<int>(exponents.size()) != w.n) throw Error(ErrorKind::DimensionMismatch, "exponent count");
  const double var = 2.0 * w.t;
  double r = 1.0;
  for (int k : exponents) {
    if (k < 0) throw Error(ErrorKind::InvalidSpec, "negative exponent");
    if (k % 2 != 0) return 0.0;
    r *= double_factorial_odd(k) * std::pow(var, k / 2);
  }
  return r;
}

double gaussian_expectation(const GaussianWeight& w, const std::function<double(std::span<const double>)>& f,
                            int order) {
  const quad::Rule1D gh = quad::gauss_hermite(order);
  const int n = w.n;
  const double s = 2.0 * std::sqrt(w.t);
  const double norm = std::pow(std::numbers::pi, -0.5 * n);
  std::vector<int> idx(static_cast<size_t>(n), 0);
  std::vector<double> x(static_cast<size_t>(n));
  double total = 0.0;
  while (true) {
    double wt = norm;
    for (int i = 0; i < n; ++i) {
      x[static_cast<size_t>(i)] = s * gh.nodes[static_cast<size_t>(idx[static_cast<size_t>(i)])];
      wt *= gh.weights[static_cast<size_t>(idx[static_cast<size_t>(i)])];
    }
    total += wt * f(x);
    int d = 0;
    while (d < n && ++idx[static_cast<size_t>(d)] == order) idx[static_cast<size_t>(d++)] = 0;
    if (d == n) break;
  }
  return total;
}

}  // namespace curvex
