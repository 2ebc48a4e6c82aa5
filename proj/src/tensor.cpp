#include "curvex/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace curvex {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorKind::MissingHessian: return "MissingHessian";
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::DifferentiationUnstable: return "DifferentiationUnstable";
    case ErrorKind::GeodesicLeftDomain: return "GeodesicLeftDomain";
    case ErrorKind::JacobianSingular: return "JacobianSingular";
    case ErrorKind::SupportTooLarge: return "SupportTooLarge";
    case ErrorKind::PositivityViolated: return "PositivityViolated";
    case ErrorKind::TimeTooLarge: return "TimeTooLarge";
    case ErrorKind::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorKind::IllConditionedFit: return "IllConditionedFit";
    case ErrorKind::NoiseDominates: return "NoiseDominates";
    case ErrorKind::VolumeTooLarge: return "VolumeTooLarge";
    case ErrorKind::NonPositiveVolume: return "NonPositiveVolume";
    case ErrorKind::LevelSetDegenerate: return "LevelSetDegenerate";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::GammaOutOfRange: return "GammaOutOfRange";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

// ---------------------------------------------------------------- Sym2

Sym2::Sym2(int n) : n_(n), m_(Eigen::MatrixXd::Zero(n, n)) {}

Sym2 Sym2::identity(int n) { return scaled_identity(n, 1.0); }

Sym2 Sym2::scaled_identity(int n, double s) {
  Sym2 a(n);
  for (int i = 0; i < n; ++i) a.m_(i, i) = s;
  return a;
}

Sym2 Sym2::diagonal(const std::vector<double>& d) {
  Sym2 a(static_cast<int>(d.size()));
  for (size_t i = 0; i < d.size(); ++i) a.m_(static_cast<int>(i), static_cast<int>(i)) = d[i];
  return a;
}

Sym2 Sym2::from_matrix(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::DimensionMismatch, "Sym2 needs a square matrix");
  const double asym = (m - m.transpose()).norm();
  if (asym > tol * std::max(1.0, m.norm()))
    throw Error(ErrorKind::InvalidSpec, "matrix is not symmetric");
  Sym2 a(static_cast<int>(m.rows()));
  a.m_ = 0.5 * (m + m.transpose());
  return a;
}

double Sym2::dot(const Sym2& other) const {
  if (other.n_ != n_) throw Error(ErrorKind::DimensionMismatch, "Sym2::dot");
  return m_.cwiseProduct(other.m_).sum();
}

double Sym2::quadratic_form(const double* x) const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) {
    double row = 0.0;
    for (int j = 0; j < n_; ++j) row += m_(i, j) * x[j];
    s += x[i] * row;
  }
  return s;
}

Sym2& Sym2::operator+=(const Sym2& o) {
  if (o.n_ != n_) throw Error(ErrorKind::DimensionMismatch, "Sym2 +=");
  m_ += o.m_;
  return *this;
}

Sym2& Sym2::operator-=(const Sym2& o) {
  if (o.n_ != n_) throw Error(ErrorKind::DimensionMismatch, "Sym2 -=");
  m_ -= o.m_;
  return *this;
}

Sym2& Sym2::operator*=(double s) {
  m_ *= s;
  return *this;
}

Sym2 operator+(Sym2 a, const Sym2& b) { return a += b; }
Sym2 operator-(Sym2 a, const Sym2& b) { return a -= b; }
Sym2 operator*(double s, Sym2 a) { return a *= s; }

// ---------------------------------------------------------------- Tensor4

double Tensor4::norm2() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

double Tensor4::dot(const Tensor4& other) const {
  if (other.n_ != n_) throw Error(ErrorKind::DimensionMismatch, "Tensor4::dot");
  double s = 0.0;
  for (size_t i = 0; i < data_.size(); ++i) s += data_[i] * other.data_[i];
  return s;
}

double Tensor4::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Tensor4& Tensor4::operator+=(const Tensor4& o) {
  if (o.n_ != n_) throw Error(ErrorKind::DimensionMismatch, "Tensor4 +=");
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor4& Tensor4::operator-=(const Tensor4& o) {
  if (o.n_ != n_) throw Error(ErrorKind::DimensionMismatch, "Tensor4 -=");
  for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Tensor4& Tensor4::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }
Tensor4 operator-(Tensor4 a, const Tensor4& b) { return a -= b; }
Tensor4 operator*(double s, Tensor4 a) { return a *= s; }

Tensor4 outer(const Sym2& a, const Sym2& b) {
  const int n = a.dim();
  if (b.dim() != n) throw Error(ErrorKind::DimensionMismatch, "outer");
  Tensor4 t(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) t(i, j, k, l) = a(i, j) * b(k, l);
  return t;
}

// ---------------------------------------------------------------- curvature

double curvature_symmetry_residual(const Tensor4& t) {
  const int n = t.dim();
  double r = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          const double v = t(i, j, k, l);
          r = std::max(r, std::abs(v + t(j, i, k, l)));
          r = std::max(r, std::abs(v + t(i, j, l, k)));
          r = std::max(r, std::abs(v - t(k, l, i, j)));
          r = std::max(r, std::abs(v + t(i, k, l, j) + t(i, l, j, k)));
        }
  return r;
}

AlgebraicCurvature::AlgebraicCurvature(Tensor4 t, double tol) : t_(std::move(t)) {
  const double res = curvature_symmetry_residual(t_);
  if (res > tol * std::max(1.0, t_.max_abs()))
    throw Error(ErrorKind::InvalidSpec, "tensor lacks Riemann symmetries (residual " +
                                            std::to_string(res) + ")");
}

double AlgebraicCurvature::symmetry_residual() const { return curvature_symmetry_residual(t_); }

Sym2 AlgebraicCurvature::ricci() const {
  const int n = dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int s = 0; s < n; ++s) m(i, j) += t_(i, s, j, s);
  return Sym2::from_matrix(m, 1e-8);
}

CurvatureData curvature_from_rm(const AlgebraicCurvature& rm, bool zero_derivs) {
  CurvatureData c;
  c.n = rm.dim();
  c.rm = rm;
  c.rc = rm.ricci();
  c.sc = c.rc.trace();
  c.grad_sc.assign(static_cast<size_t>(c.n), 0.0);
  if (zero_derivs) {
    c.lap_sc = 0.0;
    c.grad_rc = Tensor3(c.n);
    c.hess_rc = Tensor4(c.n);
  }
  return c;
}

CurvatureData space_form_curvature(int n, double K) {
  const Sym2 g = Sym2::identity(n);
  return curvature_from_rm(AlgebraicCurvature(0.5 * K * kulkarni_nomizu(g, g)), true);
}

double e_functional(const Tensor4& lambda) {
  const int n = lambda.dim();
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      s += lambda(i, i, j, j) + lambda(i, j, i, j) + lambda(i, j, j, i);
  return s;
}

Tensor4 v_tensor(const CurvatureData& curv) {
  if (!curv.hess_rc) throw Error(ErrorKind::MissingHessian, "v_tensor needs nabla nabla Rc");
  const int n = curv.n;
  const Tensor4& H = *curv.hess_rc;
  const auto& R = curv.rm;
  Tensor4 v(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double rr = 0.0;
          for (int s = 0; s < n; ++s)
            for (int t = 0; t < n; ++t) rr += R(i, s, j, t) * R(k, s, l, t);
          v(i, j, k, l) = (-0.6 * H(i, j, k, l) - (2.0 / 15.0) * rr +
                           (1.0 / 3.0) * curv.rc(i, j) * curv.rc(k, l)) /
                          24.0;
        }
  return v;
}

Tensor4 kulkarni_nomizu(const Sym2& h, const Sym2& k) {
  const int n = h.dim();
  if (k.dim() != n) throw Error(ErrorKind::DimensionMismatch, "kulkarni_nomizu");
  Tensor4 t(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          t(i, j, a, b) = h(i, a) * k(j, b) + h(j, b) * k(i, a) - h(i, b) * k(j, a) -
                          h(j, a) * k(i, b);
  return t;
}

CurvatureDecomposition weyl_decompose(const AlgebraicCurvature& rm) {
  const int n = rm.dim();
  if (n < 3) throw Error(ErrorKind::DimensionTooSmall, "weyl_decompose needs n >= 3");
  const Sym2 g = Sym2::identity(n);
  const Sym2 rc = rm.ricci();
  const double sc = rc.trace();
  const Sym2 traceless = rc - (sc / n) * g;

  CurvatureDecomposition d;
  d.scalar_part = (sc / (2.0 * n * (n - 1))) * kulkarni_nomizu(g, g);
  d.traceless_ricci_part = (1.0 / (n - 2)) * kulkarni_nomizu(traceless, g);
  d.weyl = rm.tensor() - d.scalar_part - d.traceless_ricci_part;
  return d;
}

}  // namespace curvex
