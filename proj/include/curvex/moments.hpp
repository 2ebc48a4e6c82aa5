#pragma once

#include <functional>
#include <span>

#include "curvex/tensor.hpp"

namespace curvex {

/// H² = (4πt)^{-n/2} exp(-|x|²/4t), a unit-mass Gaussian with variance 2t per axis.
struct GaussianWeight {
  int n;
  double t;
  GaussianWeight(int dim, double time);
};

/// ∫ H² |x|²/t = 2n.
double moment_radial(const GaussianWeight& w);

/// ∫ H² A_ij x^i x^j (times |x|²/t when weighted).
double moment_quadratic(const GaussianWeight& w, const Sym2& A, bool weighted);

/// ∫ H² λ_ijkl x^i x^j x^k x^l (times |x|²/t when weighted).
double moment_quartic(const GaussianWeight& w, const Tensor4& lambda, bool weighted);

/// ∫_{S^{n-1}} Π y_i^{k_i} dσ.
double sphere_monomial(int n, std::span<const int> exponents);

/// ∫ H² Π x_i^{k_i} by Isserlis pairings.
double wick_moment(const GaussianWeight& w, std::span<const int> exponents);

/// ∫ H² f by a product Gauss-Hermite rule of the given order per axis.
double gaussian_expectation(const GaussianWeight& w, const std::function<double(std::span<const double>)>& f,
                            int order);

}  // namespace curvex
