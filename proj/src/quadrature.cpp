#include "curvex/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "curvex/error.hpp"

namespace curvex::quad {

namespace {

// Orthonormal Hermite recurrence; returns (h_N(x), h_N'(x)).
std::pair<double, double> hermite_eval(int order, double x) {
  double p1 = std::pow(std::numbers::pi, -0.25);
  double p2 = 0.0;
  for (int j = 1; j <= order; ++j) {
    const double p3 = p2;
    p2 = p1;
    p1 = x * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
  }
  return {p1, std::sqrt(2.0 * order) * p2};
}

// Jacobi weight (1-u^2)^alpha on [-1, 1] via Golub-Welsch.
Rule1D gauss_gegenbauer(int order, double alpha) {
  const double a = alpha, b = alpha;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double kk = k;
    const double num = 4.0 * kk * (kk + a) * (kk + b) * (kk + a + b);
    const double den = std::pow(2.0 * kk + a + b, 2) * (2.0 * kk + a + b + 1.0) * (2.0 * kk + a + b - 1.0);
    J(k, k - 1) = J(k - 1, k) = std::sqrt(num / den);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const double mu0 = std::pow(2.0, a + b + 1.0) * std::tgamma(a + 1.0) * std::tgamma(b + 1.0) /
                     std::tgamma(a + b + 2.0);
  Rule1D r;
  for (int k = 0; k < order; ++k) {
    r.nodes.push_back(es.eigenvalues()(k));
    r.weights.push_back(mu0 * es.eigenvectors()(0, k) * es.eigenvectors()(0, k));
  }
  return r;
}

// Rule on S^{m-1} built recursively from S^1.
void tensor_sphere(int m, int resolution, std::vector<double>& dirs, std::vector<double>& wts) {
  if (m == 2) {
    const int count = 2 * resolution;
    for (int k = 0; k < count; ++k) {
      const double phi = 2.0 * std::numbers::pi * (k + 0.5) / count;
      dirs.push_back(std::cos(phi));
      dirs.push_back(std::sin(phi));
      wts.push_back(2.0 * std::numbers::pi / count);
    }
    return;
  }
  std::vector<double> sub_dirs, sub_wts;
  tensor_sphere(m - 1, resolution, sub_dirs, sub_wts);
  const Rule1D polar = m == 3 ? gauss_legendre(resolution, -1.0, 1.0)
                              : gauss_gegenbauer(resolution, 0.5 * (m - 3));
  for (size_t p = 0; p < polar.nodes.size(); ++p) {
    const double u = polar.nodes[p];
    const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
    for (size_t q = 0; q < sub_wts.size(); ++q) {
      dirs.push_back(u);
      for (int c = 0; c < m - 1; ++c) dirs.push_back(s * sub_dirs[q * static_cast<size_t>(m - 1) + c]);
      wts.push_back(polar.weights[p] * sub_wts[q]);
    }
  }
}

}  // namespace

Rule1D gauss_hermite(int order) {
  if (order < 1) throw Error(ErrorKind::InvalidSpec, "Gauss-Hermite order must be positive");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
  Rule1D r;
  for (int k = 0; k < order; ++k) {
    double x = es.eigenvalues()(k);
    double dp = 1.0;
    for (int it = 0; it < 4; ++it) {
      auto [p, pd] = hermite_eval(order, x);
      dp = pd;
      x -= p / pd;
    }
    dp = hermite_eval(order, x).second;
    r.nodes.push_back(x);
    r.weights.push_back(2.0 / (dp * dp));
  }
  return r;
}

Rule1D gauss_legendre(int order, double a, double b) {
  if (order < 1) throw Error(ErrorKind::InvalidSpec, "Gauss-Legendre order must be positive");
  Rule1D r;
  r.nodes.resize(static_cast<size_t>(order));
  r.weights.resize(static_cast<size_t>(order));
  const double xm = 0.5 * (b + a), xl = 0.5 * (b - a);
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < order; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
      }
      pp = order * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    r.nodes[static_cast<size_t>(i)] = xm - xl * z;
    r.nodes[static_cast<size_t>(order - 1 - i)] = xm + xl * z;
    r.weights[static_cast<size_t>(i)] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
    r.weights[static_cast<size_t>(order - 1 - i)] = r.weights[static_cast<size_t>(i)];
  }
  return r;
}

double sphere_area(int n) { return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n); }

double unit_ball_volume(int n) { return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0); }

SphereRule sphere_rule(int n, int resolution, std::uint64_t seed, int mc_samples) {
  if (n < 2 || n > 6) throw Error(ErrorKind::InvalidSpec, "sphere rules cover 2 <= n <= 6");
  SphereRule s;
  s.n = n;
  if (n <= 4) {
    tensor_sphere(n, resolution, s.directions, s.weights);
    return s;
  }
  s.monte_carlo = true;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double w = sphere_area(n) / mc_samples;
  std::vector<double> y(static_cast<size_t>(n));
  for (int k = 0; k < mc_samples; ++k) {
    double norm2 = 0.0;
    for (auto& c : y) {
      c = gauss(rng);
      norm2 += c * c;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (double c : y) s.directions.push_back(c * inv);
    s.weights.push_back(w);
  }
  return s;
}

}  // namespace curvex::quad
