#pragma once

#include <array>
#include <cmath>

#include "curvex/tensor.hpp"

namespace curvex {

/// Second-order truncated Taylor number in up to kMaxDim variables:
/// value, gradient and (symmetric) Hessian, propagated by forward mode.
struct Jet2 {
  int n = 0;
  double v = 0.0;
  std::array<double, kMaxDim> d{};
  std::array<double, kMaxDim * kMaxDim> h{};

  Jet2() = default;
  Jet2(int dim, double value) : n(dim), v(value) {}

  /// Independent variable number `i` at value `x`.
  static Jet2 variable(int dim, int i, double x) {
    Jet2 j(dim, x);
    j.d[static_cast<size_t>(i)] = 1.0;
    return j;
  }

  double hess(int a, int b) const { return h[static_cast<size_t>(a * kMaxDim + b)]; }
  double& hess(int a, int b) { return h[static_cast<size_t>(a * kMaxDim + b)]; }

  Jet2& operator+=(const Jet2& o) {
    v += o.v;
    for (int a = 0; a < n; ++a) d[a] += o.d[a];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) hess(a, b) += o.hess(a, b);
    return *this;
  }
  Jet2& operator-=(const Jet2& o) {
    v -= o.v;
    for (int a = 0; a < n; ++a) d[a] -= o.d[a];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) hess(a, b) -= o.hess(a, b);
    return *this;
  }
  Jet2& operator+=(double s) {
    v += s;
    return *this;
  }
  Jet2& operator-=(double s) {
    v -= s;
    return *this;
  }
  Jet2& operator*=(double s) {
    v *= s;
    for (int a = 0; a < n; ++a) d[a] *= s;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) hess(a, b) *= s;
    return *this;
  }
  Jet2& operator*=(const Jet2& o) {
    Jet2 r(n, v * o.v);
    for (int a = 0; a < n; ++a) r.d[a] = d[a] * o.v + v * o.d[a];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        r.hess(a, b) = hess(a, b) * o.v + v * o.hess(a, b) + d[a] * o.d[b] + o.d[a] * d[b];
    *this = r;
    return *this;
  }
  Jet2 operator-() const {
    Jet2 r = *this;
    r *= -1.0;
    return r;
  }
};

inline Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
inline Jet2 operator-(Jet2 a, const Jet2& b) { return a -= b; }
inline Jet2 operator*(Jet2 a, const Jet2& b) { return a *= b; }
inline Jet2 operator+(Jet2 a, double s) { return a += s; }
inline Jet2 operator+(double s, Jet2 a) { return a += s; }
inline Jet2 operator-(Jet2 a, double s) { return a -= s; }
inline Jet2 operator-(double s, const Jet2& a) { return -a + s; }
inline Jet2 operator*(Jet2 a, double s) { return a *= s; }
inline Jet2 operator*(double s, Jet2 a) { return a *= s; }

/// f(u) given f, f', f'' at u.v.
inline Jet2 chain(const Jet2& u, double f0, double f1, double f2) {
  Jet2 r(u.n, f0);
  for (int a = 0; a < u.n; ++a) r.d[a] = f1 * u.d[a];
  for (int a = 0; a < u.n; ++a)
    for (int b = 0; b < u.n; ++b) r.hess(a, b) = f1 * u.hess(a, b) + f2 * u.d[a] * u.d[b];
  return r;
}

inline Jet2 reciprocal(const Jet2& u) {
  const double i = 1.0 / u.v;
  return chain(u, i, -i * i, 2.0 * i * i * i);
}
inline Jet2 operator/(const Jet2& a, const Jet2& b) { return a * reciprocal(b); }
inline Jet2 operator/(Jet2 a, double s) { return a *= (1.0 / s); }
inline Jet2 operator/(double s, const Jet2& a) { return s * reciprocal(a); }

inline Jet2 exp(const Jet2& u) {
  const double e = std::exp(u.v);
  return chain(u, e, e, e);
}
inline Jet2 log(const Jet2& u) { return chain(u, std::log(u.v), 1.0 / u.v, -1.0 / (u.v * u.v)); }
inline Jet2 sqrt(const Jet2& u) {
  const double s = std::sqrt(u.v);
  return chain(u, s, 0.5 / s, -0.25 / (s * u.v));
}
inline Jet2 sin(const Jet2& u) {
  const double s = std::sin(u.v), c = std::cos(u.v);
  return chain(u, s, c, -s);
}
inline Jet2 cos(const Jet2& u) {
  const double s = std::sin(u.v), c = std::cos(u.v);
  return chain(u, c, -s, -c);
}
inline Jet2 sinh(const Jet2& u) {
  const double s = std::sinh(u.v), c = std::cosh(u.v);
  return chain(u, s, c, s);
}
inline Jet2 cosh(const Jet2& u) {
  const double s = std::sinh(u.v), c = std::cosh(u.v);
  return chain(u, c, s, c);
}
inline Jet2 square(const Jet2& u) { return u * u; }

}  // namespace curvex
