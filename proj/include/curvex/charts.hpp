#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "curvex/jet.hpp"
#include "curvex/tensor.hpp"

namespace curvex {

/// Axis-aligned coordinate box, optionally intersected with the open ball
/// |x| < max_norm (used by the space-form catalog, whose closed-form metric
/// degenerates at the conjugate radius).
struct DomainBox {
  std::vector<double> lo;
  std::vector<double> hi;
  double max_norm = std::numeric_limits<double>::infinity();

  static DomainBox cube(int n, double half_width);
  bool contains(std::span<const double> x) const;
  /// Euclidean coordinate distance from x to the boundary (negative outside).
  double clearance(std::span<const double> x) const;
};

/// Metric components as second-order jets: fills g[i*n + j] given the
/// coordinate jets x[0..n).
using MetricJetFn = std::function<void(const Jet2* x, Jet2* g)>;
using CurvatureFn = std::function<CurvatureData(std::span<const double>)>;
using ScalarFn = std::function<double(std::span<const double>)>;

enum class ModelKind { Flat, SpaceForm, ProductSphereLine, ConformalFlat };

/// Smooth conformal factor g = exp(2 phi) delta with
/// phi(x) = epsilon * exp(-|x - center|^2 / (2 sigma^2)).
struct Perturbation {
  double epsilon = 0.0;
  double sigma = 1.0;
  std::vector<double> center;  // empty means the origin
};

struct ModelSpec {
  ModelKind kind = ModelKind::Flat;
  int n = 3;
  /// Sectional curvature of the model (sphere factor for the product).
  double K = 0.0;
  /// Extent of the chart: half-width of the coordinate box, or the radius
  /// of the coordinate ball for space forms. Non-positive picks a default.
  double radius = 0.0;
  std::optional<Perturbation> perturbation;
};

std::string to_string(ModelKind kind);
std::optional<ModelKind> model_kind_from_string(const std::string& s);

/// sn_K(r): sin(sqrt(K) r)/sqrt(K), r, or sinh(sqrt(-K) r)/sqrt(-K).
double sn_k(double K, double r);
/// d/dr sn_K(r).
double cs_k(double K, double r);

/// Levi-Civita data at a point in chart coordinates.
struct Connection {
  Eigen::MatrixXd g;
  Eigen::MatrixXd ginv;
  Tensor3 gamma;   // gamma(k, i, j) = Γ^k_ij
  Tensor4 dgamma;  // dgamma(m, k, i, j) = ∂_m Γ^k_ij (empty unless requested)
};

/// A coordinate domain with a smooth metric and optional analytic curvature.
/// Immutable after construction and safe to share between threads.
class MetricChart {
 public:
  /// Checks positive-definiteness of the metric on a sample grid; throws
  /// InvalidSpec if it fails.
  MetricChart(int n, DomainBox domain, MetricJetFn metric, std::string name = "custom");

  int dim() const { return n_; }
  const DomainBox& domain() const { return domain_; }
  const std::string& name() const { return name_; }

  Eigen::MatrixXd metric(std::span<const double> x) const;
  void metric_jet(std::span<const double> x, Jet2* g) const;
  Connection connection(std::span<const double> x, bool with_derivative) const;

  /// Scalar curvature at x: analytic when available, else from the jets.
  double scalar_curvature(std::span<const double> x) const;

  const std::optional<CurvatureFn>& curvature_callback() const { return curvature_; }
  const std::optional<ModelSpec>& model() const { return model_; }

  void set_curvature_callback(CurvatureFn fn) { curvature_ = std::move(fn); }
  void set_scalar_curvature(ScalarFn fn) { scalar_ = std::move(fn); }
  void set_model(ModelSpec spec) { model_ = std::move(spec); }

 private:
  int n_;
  DomainBox domain_;
  MetricJetFn metric_;
  std::string name_;
  std::optional<CurvatureFn> curvature_;
  std::optional<ScalarFn> scalar_;
  std::optional<ModelSpec> model_;
};

/// Catalog: flat, space_form, product_sphere_line (S^{n-1}(K) x R),
/// conformal_flat. Space forms come in normal coordinates at the origin.
MetricChart make_chart(const ModelSpec& spec);

/// Curvature at x expressed in the orthonormal frame g(x)^{-1/2}. Uses the
/// chart's analytic callback when present. Otherwise Riemann comes from the
/// metric jets and the derivative fields (∇Sc, ΔSc, ∇Rc, ∇∇Rc) from
/// Richardson-extrapolated central differences of the jet-computed Ricci
/// field. Throws OutOfDomain, DifferentiationUnstable.
CurvatureData curvature_at(const MetricChart& chart, std::span<const double> x);

/// Same, forcing the jet + finite-difference route even when a callback exists.
CurvatureData curvature_generic(const MetricChart& chart, std::span<const double> x);

/// Pointwise data of the pulled-back metric in normal coordinates.
struct NormalSample {
  std::vector<double> point;  // exp(x) in base coordinates
  double density = 1.0;       // sqrt(det g̃(x))
  Eigen::MatrixXd ginv;       // g̃(x)^{-1}
  double scalar_curvature = 0.0;
};

struct ShootingOptions {
  double rel_tol = 1e-11;
  double abs_tol = 1e-13;
};

/// Normal coordinates at p: x ∈ T_pM (in the frame g(p)^{-1/2}) ↦ exp_p(x).
class NormalChart {
 public:
  enum class Method { Translation, ClosedFormSpaceForm, Shooting };

  NormalChart(std::shared_ptr<const MetricChart> base, std::vector<double> center, double radius,
              Method method, ShootingOptions opts = {});

  int dim() const { return base_->dim(); }
  const MetricChart& base() const { return *base_; }
  std::shared_ptr<const MetricChart> base_ptr() const { return base_; }
  const std::vector<double>& center() const { return center_; }
  double radius() const { return radius_; }
  Method method() const { return method_; }

  NormalSample sample(std::span<const double> x) const;
  /// Samples along the ray s ↦ s*direction (|direction| = 1) at the given
  /// increasing radii; one geodesic integration for the whole ray.
  std::vector<NormalSample> sample_ray(std::span<const double> direction,
                                       std::span<const double> radii) const;

  std::vector<double> exp(std::span<const double> x) const { return sample(x).point; }
  double density(std::span<const double> x) const { return sample(x).density; }

  /// Pulled-back metric g̃(x) (inverse of NormalSample::ginv).
  Eigen::MatrixXd pulled_back_metric(std::span<const double> x) const;

 private:
  std::shared_ptr<const MetricChart> base_;
  std::vector<double> center_;
  double radius_;
  Method method_;
  ShootingOptions opts_;
  Eigen::MatrixXd frame_;  // columns orthonormal for g(p)
};

/// Throws OutOfDomain if the ball of radius r0 around p leaves the domain
/// (coordinate check for catalog models, shooting check otherwise) and
/// InvalidSpec if r0 exceeds the closed-form injectivity bound of a model.
NormalChart build_normal_chart(std::shared_ptr<const MetricChart> chart, std::vector<double> p,
                               double r0, ShootingOptions opts = {});

/// Conservative injectivity radius known in closed form for catalog models
/// (infinity when unknown or unbounded).
double injectivity_bound(const MetricChart& chart);

struct DensitySeries {
  Sym2 order2;                    // -(1/6) Rc
  Tensor3 order3;                 // -(1/12) ∇_k R_ij, index (i, j, k)
  std::optional<Tensor4> order4;  // v_ijkl; empty when hess_rc is missing
};

/// Taylor coefficients of det(g̃)^{1/2} at the center of normal coordinates.
DensitySeries density_series(const CurvatureData& curv);

}  // namespace curvex
