#pragma once

#include <memory>
#include <vector>

#include "curvex/functionals.hpp"

namespace curvex {

/// Radius of the geodesic ball of volume beta in the space form of curvature K.
/// Throws NonPositiveVolume, VolumeTooLarge.
double space_form_radius(int n, double K, double beta);

/// Area of the boundary of that ball: the isoperimetric profile of the space form.
double iso_profile(int n, double K, double beta);

/// Total volume of the sphere of curvature K > 0; +inf otherwise.
double space_form_total_volume(int n, double K);

/// Area of the geodesic sphere of radius r, ∫ density(rθ) r^{n-1} dθ.
double geodesic_sphere_area(const NormalChart& nchart, double r, const QuadratureSpec& q);
/// Radius of the geodesic ball of volume beta about the chart center.
/// Throws SupportTooLarge when it leaves the chart, NotConverged.
double geodesic_ball_radius(const NormalChart& nchart, double beta, const QuadratureSpec& q);

/// Radial nonincreasing rearrangement ū on the space form of curvature K.
/// ū(radii[k]) = values[k]; ū = 0 beyond the last radius.
class RadialProfile {
 public:
  RadialProfile(int n, double K, double t, std::vector<double> radii, std::vector<double> values);

  int dim() const { return n_; }
  double curvature() const { return K_; }
  const std::vector<double>& radii() const { return radii_; }
  const std::vector<double>& values() const { return values_; }

  double value(double r) const;
  double derivative(double r) const;
  /// Radius where ū crosses the level s (inside the ladder range).
  double radius_of_level(double s) const;

  /// mass, entropy and Dirichlet energy of ū in the space form.
  FunctionalComponents components() const;

 private:
  double log_value(double r2) const;
  double log_slope(double r2) const;

  int n_;
  double K_;
  double t_;
  std::vector<double> radii_, values_;
  struct Interp;
  std::shared_ptr<const Interp> interp_;
};

struct SymmetrizeResult {
  RadialProfile profile;
  std::vector<double> levels;   // decreasing
  std::vector<double> volumes;  // Vol({u ≥ level})
  /// Ladder indices whose volume jump suggests a plateau; excluded from checks.
  std::vector<int> degenerate_levels;
};

/// Superlevel-set volume Vol({u(·,t) ≥ s}) in the chart measure.
double superlevel_volume(const TestFunction& tf, double t, double s, const QuadratureSpec& q);

/// Throws LevelSetDegenerate when a level cannot be bracketed. levels ≥ 64.
SymmetrizeResult symmetrize(const TestFunction& tf, double t, double K, int levels,
                            const QuadratureSpec& q = {});

struct DirichletComparison {
  double lhs = 0.0;  // ∫ |∇ū|² dμ_K
  double rhs = 0.0;  // ∫ |∇u|² dμ
};
DirichletComparison polya_szego_check(const TestFunction& tf, double t, double K, const QuadratureSpec& q,
                                      int levels = 256);

struct HolderStep {
  double area_sq = 0.0;  // Area(Γ_s)²
  double product = 0.0;  // ∫_Γ |∇u| dσ · ∫_Γ 1/|∇u| dσ
  double inv_grad = 0.0; // ∫_Γ 1/|∇u| dσ
  double volume_slope = 0.0;  // −d/ds Vol({u ≥ s})
};
/// Surface integrals over Γ_s = {u = s} on the ray parametrization
/// dσ = density ρ^{n-1} |∇u| / |∂_r u| dθ; volume_slope by fourth-order
/// differences of superlevel volumes. Throws LevelSetDegenerate.
HolderStep holder_step_check(const TestFunction& tf, double t, double s, const QuadratureSpec& q);

/// Value of u(·,t) at the center.
double peak_value(const TestFunction& tf, double t);

}  // namespace curvex
