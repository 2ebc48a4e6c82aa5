#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "curvex/error.hpp"

namespace curvex {

/// Largest dimension the dense tensor types are meant for.
inline constexpr int kMaxDim = 6;

/// Symmetric 2-tensor at a point, components in an orthonormal frame.
class Sym2 {
 public:
  Sym2() = default;
  explicit Sym2(int n);

  static Sym2 identity(int n);
  static Sym2 scaled_identity(int n, double s);
  static Sym2 diagonal(const std::vector<double>& d);
  /// Symmetrizes the input; throws DimensionMismatch for non-square input
  /// and InvalidSpec if the asymmetry exceeds `tol` relative to its norm.
  static Sym2 from_matrix(const Eigen::MatrixXd& m, double tol = 1e-10);

  int dim() const { return n_; }
  double operator()(int i, int j) const { return m_(i, j); }
  void set(int i, int j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  const Eigen::MatrixXd& matrix() const { return m_; }

  double trace() const { return m_.trace(); }
  /// Full-index sum of squares.
  double norm2() const { return m_.squaredNorm(); }
  /// Sum_ij a_ij b_ij.
  double dot(const Sym2& other) const;
  /// a_ij x^i x^j.
  double quadratic_form(const double* x) const;

  Sym2& operator+=(const Sym2& o);
  Sym2& operator-=(const Sym2& o);
  Sym2& operator*=(double s);

 private:
  int n_ = 0;
  Eigen::MatrixXd m_;
};

Sym2 operator+(Sym2 a, const Sym2& b);
Sym2 operator-(Sym2 a, const Sym2& b);
Sym2 operator*(double s, Sym2 a);

/// Dense rank-3 array, index order (i, j, k).
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), data_(static_cast<size_t>(n * n * n), 0.0) {}

  int dim() const { return n_; }
  double& operator()(int i, int j, int k) { return data_[idx(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data_[idx(i, j, k)]; }
  const std::vector<double>& data() const { return data_; }
  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  size_t idx(int i, int j, int k) const { return static_cast<size_t>((i * n_ + j) * n_ + k); }
  int n_ = 0;
  std::vector<double> data_;
};

/// Dense rank-4 array, index order (i, j, k, l).
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int n) : n_(n), data_(static_cast<size_t>(n * n * n * n), 0.0) {}

  int dim() const { return n_; }
  double& operator()(int i, int j, int k, int l) { return data_[idx(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return data_[idx(i, j, k, l)]; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double norm2() const;
  double dot(const Tensor4& other) const;
  /// Largest absolute entry.
  double max_abs() const;

  Tensor4& operator+=(const Tensor4& o);
  Tensor4& operator-=(const Tensor4& o);
  Tensor4& operator*=(double s);

 private:
  size_t idx(int i, int j, int k, int l) const {
    return static_cast<size_t>(((i * n_ + j) * n_ + k) * n_ + l);
  }
  int n_ = 0;
  std::vector<double> data_;
};

Tensor4 operator+(Tensor4 a, const Tensor4& b);
Tensor4 operator-(Tensor4 a, const Tensor4& b);
Tensor4 operator*(double s, Tensor4 a);

/// (a ⊗ b)_ijkl = a_ij b_kl.
Tensor4 outer(const Sym2& a, const Sym2& b);

/// Rank-4 tensor with the algebraic symmetries of a Riemann tensor.
///
/// Convention: R_ijkl = g(R(e_i, e_j) e_l, e_k), so that a space form of
/// curvature K has R_ijij = K on orthonormal pairs and |Rm|^2 = 2n(n-1)K^2.
/// Ricci is the contraction Rc_ij = sum_s R_isjs. Externally computed tensors
/// with the opposite sign convention are not detected.
class AlgebraicCurvature {
 public:
  AlgebraicCurvature() = default;
  explicit AlgebraicCurvature(int n) : t_(n) {}
  /// Throws InvalidSpec if any symmetry family fails by more than
  /// `tol * max(1, max|R|)`.
  explicit AlgebraicCurvature(Tensor4 t, double tol = 1e-10);

  int dim() const { return t_.dim(); }
  double operator()(int i, int j, int k, int l) const { return t_(i, j, k, l); }
  const Tensor4& tensor() const { return t_; }
  double norm2() const { return t_.norm2(); }

  /// Largest violation of antisymmetry, pair symmetry and first Bianchi.
  double symmetry_residual() const;

  Sym2 ricci() const;

 private:
  Tensor4 t_;
};

/// Largest violation of the three Riemann symmetry families.
double curvature_symmetry_residual(const Tensor4& t);

/// Pointwise curvature package in an orthonormal frame.
struct CurvatureData {
  int n = 0;
  AlgebraicCurvature rm;
  Sym2 rc;
  double sc = 0.0;
  std::vector<double> grad_sc;
  std::optional<double> lap_sc;
  /// grad_rc(i, j, k) = nabla_k R_ij.
  std::optional<Tensor3> grad_rc;
  /// hess_rc(i, j, k, l) = nabla_k nabla_l R_ij.
  std::optional<Tensor4> hess_rc;

  double rm_norm2() const { return rm.norm2(); }
  double rc_norm2() const { return rc.norm2(); }
};

/// Curvature of the space form of sectional curvature K: R = (K/2) g⊙g,
/// every covariant derivative zero.
CurvatureData space_form_curvature(int n, double K);

/// Builds the package from Rm alone: Ricci and scalar curvature are taken
/// as traces, derivative fields are left empty (or zero when `zero_derivs`).
CurvatureData curvature_from_rm(const AlgebraicCurvature& rm, bool zero_derivs);

/// E(λ) = Σ_ij (λ_iijj + λ_ijij + λ_ijji).
double e_functional(const Tensor4& lambda);

/// Quartic coefficient of the normal-coordinate volume density:
/// v_ijkl = (1/24)(-(3/5)∇_k∇_l R_ij - (2/15)Σ_st R_isjt R_kslt + (1/3)R_ij R_kl).
/// Throws MissingHessian when curv.hess_rc is absent.
Tensor4 v_tensor(const CurvatureData& curv);

/// (h⊙k)_ijkl = h_ik k_jl + h_jl k_ik - h_il k_jk - h_jk k_il.
Tensor4 kulkarni_nomizu(const Sym2& h, const Sym2& k);

struct CurvatureDecomposition {
  Tensor4 scalar_part;
  Tensor4 traceless_ricci_part;
  Tensor4 weyl;
};

/// Orthogonal splitting Rm = (Sc/(2n(n-1))) g⊙g + (1/(n-2)) R̊c⊙g + W.
/// Throws DimensionTooSmall for n < 3.
CurvatureDecomposition weyl_decompose(const AlgebraicCurvature& rm);

}  // namespace curvex
