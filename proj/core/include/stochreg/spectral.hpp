#pragma once

#include "stochreg/linalg.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <span>

namespace stochreg {

inline constexpr double kSpectralTau = 1e-12;

// Dense design matrix with rows a_0, ..., a_{n-1} (0-based).
class DesignMatrix {
 public:
  DesignMatrix() = default;
  explicit DesignMatrix(RowMatrix a);

  std::size_t n() const noexcept { return static_cast<std::size_t>(a_.rows()); }
  std::size_t m() const noexcept { return static_cast<std::size_t>(a_.cols()); }
  std::span<const double> row(std::size_t i) const noexcept {
    return {a_.data() + i * m(), m()};
  }
  const RowMatrix& matrix() const noexcept { return a_; }
  double max_row_norm_sq() const noexcept { return max_row_norm_sq_; }

 private:
  RowMatrix a_;
  double max_row_norm_sq_ = 0.0;
};

// B = n^-1 A^t A with a cached symmetric eigendecomposition. Eigenvalues at or
// below tau * lambda_max are stored as exact zeros; every spectral function
// (powers, pseudo-inverse, propagator powers) is evaluated on these values.
// Copies share the immutable cache.
class GramOperator {
 public:
  GramOperator() = default;
  explicit GramOperator(const DesignMatrix& A, double tau = kSpectralTau);
  // From an explicit symmetric PSD matrix; no row data is attached.
  static GramOperator from_matrix(const Matrix& B, double tau = kSpectralTau);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(d_->B.rows()); }
  const Matrix& matrix() const noexcept { return d_->B; }
  const Vector& eigenvalues() const noexcept { return d_->lambda; }
  const Matrix& eigenvectors() const noexcept { return d_->V; }
  double norm() const noexcept { return d_->norm; }
  double tau() const noexcept { return d_->tau; }
  std::optional<double> max_row_norm_sq() const noexcept { return d_->max_row; }
  std::size_t rank() const noexcept;

  // f applied to each eigenvalue: V diag(f(lambda)) V^t v.
  template <class F>
  Vector apply(F&& f, const Vector& v) const {
    Vector c = d_->V.transpose() * v;
    for (Eigen::Index j = 0; j < c.size(); ++j) c[j] *= f(d_->lambda[j]);
    return d_->V * c;
  }
  template <class F>
  Matrix function_matrix(F&& f) const {
    Vector w(d_->lambda.size());
    for (Eigen::Index j = 0; j < w.size(); ++j) w[j] = f(d_->lambda[j]);
    return d_->V * w.asDiagonal() * d_->V.transpose();
  }

  // lambda^p with 0^0 = 1 and 0^p = 0 for p != 0 (pseudo-inverse for p < 0).
  static double spectral_power(double lambda, double p) noexcept;

  Vector power(double p, const Vector& v) const;
  Matrix power_matrix(double p) const;
  Vector pinv(const Vector& v) const { return power(-1.0, v); }

 private:
  struct Data {
    Matrix B;
    Vector lambda;
    Matrix V;
    double norm = 0.0;
    double tau = kSpectralTau;
    std::optional<double> max_row;
  };
  static std::shared_ptr<const Data> decompose(Matrix B, double tau, std::optional<double> max_row);
  std::shared_ptr<const Data> d_;
};

GramOperator build_gram(const DesignMatrix& A, double tau = kSpectralTau);

// c = (max_i |a_i|^2)^-1
double step_constant(const DesignMatrix& A);

// M0 = I - c0 B on B's eigenbasis.
class Propagator {
 public:
  Propagator(GramOperator B, double c0);

  double c0() const noexcept { return c0_; }
  const GramOperator& gram() const noexcept { return B_; }
  // c0 <= 1 / max(max_i |a_i|^2, |B|^2); without row data |B| stands in for
  // the row bound.
  bool admissible() const noexcept { return admissible_; }

  double eigenvalue(double lambda) const noexcept { return 1.0 - c0_ * lambda; }
  double norm() const noexcept;
  Matrix matrix() const;

  Vector power(double k, const Vector& v) const;
  Matrix power_matrix(double k) const;
  // c0 * sum_{i<k} M0^i applied to v, evaluated as (I - M0^k) B^-1 on the range
  // and c0 k on the null space.
  Vector step_sum(double k, const Vector& v) const;
  Matrix step_sum_matrix(double k) const;
  double step_sum_scalar(double k, double lambda) const noexcept;

 private:
  GramOperator B_;
  double c0_;
  bool admissible_;
};

Propagator propagator(const GramOperator& B, double c0);

struct KernelBoundReport {
  double lhs_power = 0.0;
  double rhs_power = 0.0;
  double lhs_inv = 0.0;
  double rhs_inv = 0.0;
  bool pass = false;
};

// |B^s M0^{KM}| <= s^s (M c0 K)^-s and |B^-t (I - M0^{KM})| <= (M c0 K)^t,
// evaluated over the spectrum; pass allows 1e-12 relative rounding slack.
KernelBoundReport kernel_bound_check(const GramOperator& B, double c0, int M, int K, double s, double t);

struct SvdFactors {
  Matrix U;      // n x r
  Vector sigma;  // r, descending
  Matrix V;      // m x r
  double tau = 0.0;
  std::size_t rank() const noexcept { return static_cast<std::size_t>(sigma.size()); }
};

// Thin SVD keeping sigma_j > tau * sigma_max.
SvdFactors svd(const DesignMatrix& A, double tau);

}  // namespace stochreg
