#pragma once

#include <array>
#include <optional>
#include <vector>

#include "curvex/functionals.hpp"

namespace curvex {

/// c0 + c1 t + c2 t² with per-coefficient uncertainties.
struct SeriesCoefficients {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  std::array<double, 3> stderr_{};     // (c0, c1, c2)
  std::array<double, 3> systematic{};  // |full-grid fit − half-grid fit|
  double fit_residual = 0.0;
};

SeriesCoefficients predict_L(const CurvatureData& curv, const Sym2& a, double alpha);
SeriesCoefficients predict_W(const CurvatureData& curv, const Sym2& a);
/// Series of t ∫ Sc u² dμ.
SeriesCoefficients predict_scalar_term(const CurvatureData& curv, const Sym2& a, double alpha);

struct VolumeCoefficients {
  double coeff_r2 = 0.0;
  double coeff_r4 = 0.0;
};
/// Vol(B(p,r)) / (ω_n rⁿ) = 1 + coeff_r2 r² + coeff_r4 r⁴ + ...
VolumeCoefficients predict_volume(const CurvatureData& curv);

struct SeriesSample {
  double t = 0.0;
  double value = 0.0;
  double quad_error = 0.0;
};

enum class SeriesModel { Linear12, Full012 };

/// Weighted least squares; the headline is the fit on the smallest-t half.
/// Throws InvalidSpec, IllConditionedFit, NoiseDominates (only when the
/// expected |c2| scale is supplied).
SeriesCoefficients extract_series(const std::vector<SeriesSample>& samples, SeriesModel model,
                                  std::optional<double> expected_c2_scale = std::nullopt);

struct TGrid {
  std::vector<double> values;
  double refinement_factor = 0.0;
};

/// Geometric grid t_max, t_max·f, ..., strictly decreasing.
TGrid make_t_grid(double t_max, int points, double factor = 0.7071067811865476);

/// Largest t with cutoff tail bound below rel · c2_scale · t².
double choose_t_max(int n, double support_radius, double c2_scale, double rel = 1e-12);

enum class FunctionalKind { L, W };

std::vector<SeriesSample> sample_series(const TestFunction& tf, FunctionalKind kind, const TGrid& grid,
                                        const QuadratureSpec& q, ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace curvex
