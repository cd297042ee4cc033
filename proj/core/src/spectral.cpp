#include "stochreg/spectral.hpp"

#include "stochreg/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace stochreg {

DesignMatrix::DesignMatrix(RowMatrix a) : a_(std::move(a)) {
  if (a_.rows() < 1 || a_.cols() < 1) throw InputError("design matrix needs n >= 1 and m >= 1");
  if (!a_.allFinite()) throw InputError("design matrix has non-finite entries");
  for (std::size_t i = 0; i < n(); ++i) {
    auto r = row(i);
    max_row_norm_sq_ = std::max(max_row_norm_sq_, kernel::dot(r, r));
  }
}

std::shared_ptr<const GramOperator::Data> GramOperator::decompose(Matrix B, double tau,
                                                                  std::optional<double> max_row) {
  if (!B.allFinite()) throw InputError("gram operator: non-finite entries");
  if (B.rows() != B.cols() || B.rows() < 1) throw InputError("gram operator: matrix must be square");
  if (!(tau >= 0.0 && tau < 1.0)) throw InputError("gram operator: tau must lie in [0, 1)");
  B = 0.5 * (B + B.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(B);
  if (es.info() != Eigen::Success) throw NumericalError("gram operator: eigendecomposition failed");
  auto d = std::make_shared<Data>();
  d->lambda = es.eigenvalues();
  d->V = es.eigenvectors();
  d->norm = std::max(0.0, d->lambda.maxCoeff());
  const double cut = tau * d->norm;
  for (Eigen::Index j = 0; j < d->lambda.size(); ++j)
    if (d->lambda[j] <= cut) d->lambda[j] = 0.0;
  d->B = std::move(B);
  d->tau = tau;
  d->max_row = max_row;
  return d;
}

GramOperator::GramOperator(const DesignMatrix& A, double tau) {
  const auto& a = A.matrix();
  Matrix B = (a.transpose() * a) / static_cast<double>(A.n());
  d_ = decompose(std::move(B), tau, A.max_row_norm_sq());
}

GramOperator GramOperator::from_matrix(const Matrix& B, double tau) {
  GramOperator g;
  g.d_ = decompose(B, tau, std::nullopt);
  return g;
}

std::size_t GramOperator::rank() const noexcept {
  return static_cast<std::size_t>((d_->lambda.array() > 0.0).count());
}

double GramOperator::spectral_power(double lambda, double p) noexcept {
  if (p == 0.0) return 1.0;
  if (lambda <= 0.0) return 0.0;
  return std::pow(lambda, p);
}

Vector GramOperator::power(double p, const Vector& v) const {
  return apply([p](double l) { return spectral_power(l, p); }, v);
}

Matrix GramOperator::power_matrix(double p) const {
  return function_matrix([p](double l) { return spectral_power(l, p); });
}

GramOperator build_gram(const DesignMatrix& A, double tau) { return GramOperator(A, tau); }

double step_constant(const DesignMatrix& A) {
  const double r = A.max_row_norm_sq();
  if (!(r > 0.0)) throw DegenerateInputError("step constant: every row of A is zero");
  return 1.0 / r;
}

Propagator::Propagator(GramOperator B, double c0) : B_(std::move(B)), c0_(c0) {
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw InputError("propagator: c0 must be positive and finite");
  const double nb = B_.norm();
  const double row = B_.max_row_norm_sq().value_or(nb);
  const double bound = std::max(row, nb * nb);
  admissible_ = bound <= 0.0 || c0 <= 1.0 / bound;
}

double Propagator::norm() const noexcept {
  double r = 0.0;
  for (double l : B_.eigenvalues()) r = std::max(r, std::abs(eigenvalue(l)));
  return r;
}

Matrix Propagator::matrix() const {
  return B_.function_matrix([this](double l) { return eigenvalue(l); });
}

Vector Propagator::power(double k, const Vector& v) const {
  return B_.apply([this, k](double l) { return std::pow(eigenvalue(l), k); }, v);
}

Matrix Propagator::power_matrix(double k) const {
  return B_.function_matrix([this, k](double l) { return std::pow(eigenvalue(l), k); });
}

double Propagator::step_sum_scalar(double k, double lambda) const noexcept {
  if (lambda <= 0.0) return c0_ * k;
  const double x = c0_ * lambda;
  if (x < 1.0) return -std::expm1(k * std::log1p(-x)) / lambda;
  return (1.0 - std::pow(1.0 - x, k)) / lambda;
}

Vector Propagator::step_sum(double k, const Vector& v) const {
  return B_.apply([this, k](double l) { return step_sum_scalar(k, l); }, v);
}

Matrix Propagator::step_sum_matrix(double k) const {
  return B_.function_matrix([this, k](double l) { return step_sum_scalar(k, l); });
}

Propagator propagator(const GramOperator& B, double c0) { return Propagator(B, c0); }

KernelBoundReport kernel_bound_check(const GramOperator& B, double c0, int M, int K, double s, double t) {
  if (!(s >= 0.0)) throw InputError("kernel_bound_check: s must be nonnegative");
  if (!(t >= 0.0 && t <= 1.0)) throw InputError("kernel_bound_check: t must lie in [0, 1]");
  if (M < 1 || K < 1) throw InputError("kernel_bound_check: M and K must be positive");
  if (!(c0 > 0.0)) throw InputError("kernel_bound_check: c0 must be positive");
  const double km = static_cast<double>(K) * M;
  const double mck = M * c0 * K;
  KernelBoundReport r;
  for (double l : B.eigenvalues()) {
    const double p = std::pow(1.0 - c0 * l, km);
    r.lhs_power = std::max(r.lhs_power, GramOperator::spectral_power(l, s) * std::abs(p));
    if (l > 0.0) r.lhs_inv = std::max(r.lhs_inv, std::pow(l, -t) * std::abs(1.0 - p));
  }
  r.rhs_power = std::pow(s, s) * std::pow(mck, -s);
  r.rhs_inv = std::pow(mck, t);
  constexpr double slack = 1.0 + 1e-12;
  r.pass = r.lhs_power <= r.rhs_power * slack && r.lhs_inv <= r.rhs_inv * slack;
  return r;
}

SvdFactors svd(const DesignMatrix& A, double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) throw InputError("svd: tau must lie in [0, 1)");
  Eigen::BDCSVD<Matrix> dec(Matrix(A.matrix()), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success)
    throw NumericalError("svd: decomposition did not converge (n=" + std::to_string(A.n()) +
                         ", m=" + std::to_string(A.m()) + ")");
  const Vector& sv = dec.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  Eigen::Index r = 0;
  while (r < sv.size() && sv[r] > tau * smax && sv[r] > 0.0) ++r;
  SvdFactors f;
  f.U = dec.matrixU().leftCols(r);
  f.sigma = sv.head(r);
  f.V = dec.matrixV().leftCols(r);
  f.tau = tau;
  return f;
}

}  // namespace stochreg
