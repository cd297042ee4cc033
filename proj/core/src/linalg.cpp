#include "stochreg/linalg.hpp"

namespace stochreg::kernel {

void matvec(const RowMatrix& A, const Vector& x, Vector& out) {
  const auto n = A.rows();
  const auto m = A.cols();
  out.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = dot(A.row(i).data(), x.data(), m);
}

void gradient_from_residual(const RowMatrix& A, const Vector& r, Vector& g) {
  const auto n = A.rows();
  const auto m = A.cols();
  g.setZero(m);
  double* gd = g.data();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* a = A.row(i).data();
    const double ri = r[i];
    for (Eigen::Index j = 0; j < m; ++j) gd[j] += ri * a[j];
  }
  const double nd = static_cast<double>(n);
  for (Eigen::Index j = 0; j < m; ++j) gd[j] = gd[j] / nd;
}

void full_gradient(const RowMatrix& A, const Vector& x, const Vector& y, Vector& ax, Vector& r, Vector& g) {
  matvec(A, x, ax);
  r.resize(ax.size());
  for (Eigen::Index i = 0; i < ax.size(); ++i) r[i] = ax[i] - y[i];
  gradient_from_residual(A, r, g);
}

double dist_sq(const Vector& u, const Vector& v) {
  const std::size_t len = static_cast<std::size_t>(u.size());
  const double* a = u.data();
  const double* b = v.data();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= len; k += 4) {
    const double d0 = a[k] - b[k], d1 = a[k + 1] - b[k + 1];
    const double d2 = a[k + 2] - b[k + 2], d3 = a[k + 3] - b[k + 3];
    s0 += d0 * d0;
    s1 += d1 * d1;
    s2 += d2 * d2;
    s3 += d3 * d3;
  }
  for (; k < len; ++k) {
    const double d = a[k] - b[k];
    s0 += d * d;
  }
  return (s0 + s1) + (s2 + s3);
}

}  // namespace stochreg::kernel
