#pragma once

#include <vector>

#include "curvex/error.hpp"

namespace curvex {

/// Geodesic ball of radius R in the space form of curvature K.
struct RadialDomain {
  int n = 3;
  double K = 0.0;
  double R = 1.0;
  /// Sample count for the returned minimizer.
  int m = 256;

  void validate() const;
};

enum class MuInit { Gaussian, Uniform };

struct MuOptions {
  /// Galerkin basis size on the coarse level; the fine level doubles it.
  int basis = 20;
  int max_iter = 100000;
  double grad_tol = 1e-8;
  /// Mesh-convergence threshold on |mu(2N) − mu(N)|.
  double mesh_tol = 1e-6;
};

struct MuEstimate {
  double mu = 0.0;
  double t = 0.0;
  std::vector<double> radii;
  std::vector<double> minimizer;  // f ≥ 0 at radii
  double grad_norm = 0.0;
  int iterations = 0;
  double mesh_delta = 0.0;
  double constraint_residual = 0.0;  // |∫ f² dμ − 1|
  int negative_iterates = 0;
  bool converged = false;
  /// Objective never increased across accepted steps.
  bool monotone = true;
};

/// Minimizes the radial 𝒲 over unit-mass f vanishing at R. Never throws
/// NotConverged; the flag is reported instead.
MuEstimate minimize_W(const RadialDomain& dom, double t, MuInit init, const MuOptions& opts = {});

/// 𝒲 of a radial profile given on a grid (cubic B-spline on a uniform grid, unit mass
/// enforced by rescaling); an independent check of the solver's energy.
double radial_W(const RadialDomain& dom, double t, const std::vector<double>& radii,
                const std::vector<double>& f);

struct MuSample {
  double t = 0.0;
  double mu = 0.0;
};

struct MuBoundReport {
  double q = 0.0;  // mu ≈ −q t² on the smallest-t half
  double q_stderr = 0.0;
  double Q = 0.0;
  double gamma = 0.0;
  /// q ≤ Q up to one standard error.
  bool within = false;
  /// Q / (1/6 − γ).
  double implied_rm_bound = 0.0;
};

/// Throws IllConditionedFit for fewer than two distinct times, GammaOutOfRange.
MuBoundReport mu_bound_report(const std::vector<MuSample>& samples, double gamma, double Q);

}  // namespace curvex
