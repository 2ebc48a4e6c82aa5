#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "curvex/charts.hpp"

namespace curvex {

enum class QuadRule { ProductHermite, RadialSphere };

struct QuadratureSpec {
  QuadRule rule = QuadRule::ProductHermite;
  /// Gauss-Hermite order per axis, or radial Gauss-Legendre order.
  int order = 40;
  /// Radial truncation in the scaled variable z = x / (2 sqrt t).
  double c_trunc = 10.0;
  double target_tol = 1e-9;
  /// Polar nodes per angle for the tensorized sphere rule.
  int sphere_resolution = 8;
  std::uint64_t seed = 0;
  int mc_samples = 1000000;

  void validate() const;
};

enum class ExecPolicy { Parallel, Serial };

/// 1 on [0, 1/2], 0 on [1, inf), quintic smoothstep in between.
double cutoff_profile(double s);
double cutoff_derivative(double s);

/// u = amplitude (4πt)^{-n/4} exp(-|x|²/8t) η with
/// η² = cutoff(|x|/r_s) max(1 + a(x,x) + αt, floor) in normal coordinates.
struct TestFunction {
  std::shared_ptr<const NormalChart> nchart;
  Sym2 a;
  double alpha = 0.0;
  double support_radius = 0.0;
  double amplitude = 1.0;
  /// 1 + a(x,x) dropped to the floor somewhere on the support at t = 0.
  bool positivity_violated = false;

  static constexpr double kFloor = 1e-300;

  /// amplitude² η²(x, t); writes the coordinate gradient when grad != nullptr.
  double eta2(const double* x, double t, double* grad, bool* clamped = nullptr) const;
  int dim() const { return nchart->dim(); }
};

enum class AMode { Optimal, Custom };

/// Optimal mode sets a = Rc(p)/3 in the normal frame. Throws SupportTooLarge.
TestFunction build_test_function(std::shared_ptr<const NormalChart> nchart, AMode mode,
                                 const std::optional<Sym2>& a_custom, double alpha, double r_s);

struct FunctionalComponents {
  double dirichlet = 0.0;  // ∫ |∇u|² dμ
  double entropy = 0.0;    // ∫ u² log u² dμ
  double mass = 0.0;       // ∫ u² dμ
  double scalar_curvature_term = 0.0;  // ∫ Sc u² dμ
};

struct FunctionalValue {
  double value = 0.0;
  FunctionalComponents components;
  double quad_error_estimate = 0.0;
  /// Some node hit the positivity floor.
  bool clamped = false;
  std::size_t nodes = 0;
};

/// Probability that |z| > z0 under π^{-n/2} exp(-|z|²), times (1 + z0²):
/// an absolute bound on the part of 𝓛 that sees the cutoff.
double cutoff_tail_bound(int n, double z0);

/// Throws TimeTooLarge, QuadratureNotConverged (deterministic rules only).
FunctionalValue eval_L(const TestFunction& tf, double t, const QuadratureSpec& q,
                       ExecPolicy policy = ExecPolicy::Parallel);
FunctionalValue eval_W(const TestFunction& tf, double t, const QuadratureSpec& q,
                       ExecPolicy policy = ExecPolicy::Parallel);
double entropy_integral(const TestFunction& tf, double t, const QuadratureSpec& q);

/// 4t·dirichlet − entropy + mass log mass − (n + (n/2) log 4πt)·mass.
double reconstruct_L(const FunctionalComponents& c, int n, double t);

/// n ω_n ∫_0^r sn_K(s)^{n-1} ds.
double model_ball_volume(int n, double K, double r);
/// n ω_n sn_K(r)^{n-1}.
double model_sphere_area(int n, double K, double r);

/// ∫_{|x|<=r} density dx in normal coordinates. Throws QuadratureNotConverged.
double ball_volume(const NormalChart& nchart, double r, const QuadratureSpec& q);

std::vector<double> bishop_gromov_ratio(const NormalChart& nchart, double K, std::span<const double> radii,
                                        const QuadratureSpec& q);

}  // namespace curvex
