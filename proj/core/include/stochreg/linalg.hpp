#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace stochreg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace kernel {

// Fixed summation order: four interleaved partial sums, combined pairwise.
// Results do not depend on alignment or vector width.
inline double dot(const double* a, const double* b, std::size_t len) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= len; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < len; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return dot(a.data(), b.data(), a.size());
}

// x_j <- x_j - alpha * a_j
inline void axpy_minus(double alpha, const double* a, double* x, std::size_t len) {
  for (std::size_t j = 0; j < len; ++j) x[j] = x[j] - alpha * a[j];
}

inline double norm_sq(const Vector& v) { return dot(v.data(), v.data(), v.size()); }

// out_i = dot(row_i(A), x)
void matvec(const RowMatrix& A, const Vector& x, Vector& out);

// g = n^-1 A^t r, with g_j = (sum_i r_i a_ij) / n summed in row order.
void gradient_from_residual(const RowMatrix& A, const Vector& r, Vector& g);

// ax = A x, r = ax - y, g = n^-1 A^t r.
void full_gradient(const RowMatrix& A, const Vector& x, const Vector& y, Vector& ax, Vector& r, Vector& g);

// |u - v|^2 in the fixed dot order.
double dist_sq(const Vector& u, const Vector& v);

}  // namespace kernel

}  // namespace stochreg
