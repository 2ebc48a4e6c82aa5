#pragma once

#include <cstdint>
#include <vector>

namespace curvex::quad {

struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for the weight exp(-x^2) on the real line
/// (weights sum to sqrt(pi)). Nodes from Golub-Welsch, polished by Newton
/// on the orthonormal recurrence so that tiny tail weights stay accurate.
Rule1D gauss_hermite(int order);

/// Gauss-Legendre rule on [a, b].
Rule1D gauss_legendre(int order, double a, double b);

/// Cubature on the unit sphere S^{n-1} in R^n. Weights sum to the sphere
/// area. `directions` is row-major, count x n.
struct SphereRule {
  int n = 0;
  std::vector<double> directions;
  std::vector<double> weights;
  /// True for the seeded Monte Carlo rule used when n >= 5.
  bool monte_carlo = false;

  size_t size() const { return weights.size(); }
  const double* direction(size_t k) const { return directions.data() + k * static_cast<size_t>(n); }
};

/// Deterministic tensorized rule for n <= 4: trapezoid on S^1, Gauss in the
/// polar cosine for higher n. `resolution` is the number of polar nodes per
/// angle (the azimuth gets 2*resolution). Exact for polynomials of degree
/// < 2*resolution. For n = 5, 6 falls back to Monte Carlo with `mc_samples`
/// uniformly distributed directions drawn from `seed`.
SphereRule sphere_rule(int n, int resolution, std::uint64_t seed = 0, int mc_samples = 1000000);

/// Area of S^{n-1}: 2 pi^{n/2} / Gamma(n/2).
double sphere_area(int n);

/// Volume of the unit ball in R^n: pi^{n/2} / Gamma(n/2 + 1).
double unit_ball_volume(int n);

}  // namespace curvex::quad
