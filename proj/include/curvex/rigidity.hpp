#pragma once

#include <memory>
#include <string>
#include <vector>

#include "curvex/functionals.hpp"

namespace curvex {

enum class Verdict { ConsistentWithRigidity, HypothesisViolated, Inconclusive };
std::string to_string(Verdict v);

enum class CheckRole { Hypothesis, Probe, Conclusion };

struct Check {
  std::string name;
  CheckRole role = CheckRole::Hypothesis;
  std::vector<double> point;
  /// Signed slack; negative beyond the tolerance means the check failed.
  double margin = 0.0;
  double tolerance = 0.0;
  bool holds = true;
};

struct RigidityReport {
  std::vector<Check> checks;
  Verdict verdict = Verdict::Inconclusive;
  /// Indices into `checks` that failed.
  std::vector<size_t> violations;
};

/// −c1 ≤ n(n−1)K + err, margin n(n−1)K + c1.
Check scalar_bound_check(double c1_measured, double err, int n, double K);

/// Q / (1/6 − γ). Throws GammaOutOfRange unless γ < 1/6; InvalidSpec for Q < 0.
double rm_bound_from_mu(double gamma, double Q);

struct CurvatureResidual {
  double rm_excess = 0.0;  // |Rm|² − 2n(n−1)K²
  double weyl_norm = 0.0;
  double traceless_rc_norm = 0.0;
};
/// Throws DimensionTooSmall for n < 3.
CurvatureResidual constant_curvature_residual(const CurvatureData& curv, double K);

struct PipelineOptions {
  double tol = 1e-6;
  /// Also check ΔSc ≥ 0.
  bool extended = false;
  QuadratureSpec quad = [] {
    QuadratureSpec q;
    q.rule = QuadRule::RadialSphere;
    q.order = 40;
    q.sphere_resolution = 8;
    return q;
  }();
};

/// (a) Sc ≥ n(n−1)K at each point, (b) geodesic-ball isoperimetric probe
/// at each volume in beta_probe, and constant-curvature residuals.
RigidityReport theorem_1_1_pipeline(std::shared_ptr<const MetricChart> chart,
                                    const std::vector<std::vector<double>>& points, double K,
                                    const std::vector<double>& beta_probe, const PipelineOptions& opts = {});

}  // namespace curvex
