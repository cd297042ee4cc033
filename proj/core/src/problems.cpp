#include "stochreg/problems.hpp"

#include "stochreg/errors.hpp"
#include "stochreg/random.hpp"

#include <Eigen/SVD>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stochreg {

namespace {

constexpr std::uint64_t kNoiseStream = 0x6E6F697365ull;  // "noise"

double linf(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

ProblemInstance make_instance(std::string name, RowMatrix A, Vector x_dag, Vector x0) {
  ProblemInstance p;
  p.name = std::move(name);
  p.A = DesignMatrix(std::move(A));
  if (static_cast<std::size_t>(x_dag.size()) != p.m()) throw InputError("x_dag length must equal m");
  p.x_dag = std::move(x_dag);
  p.x0 = x0.size() ? std::move(x0) : Vector::Zero(p.m());
  if (static_cast<std::size_t>(p.x0.size()) != p.m()) throw InputError("x0 length must equal m");
  kernel::matvec(p.A.matrix(), p.x_dag, p.y_dag);
  return p;
}

double shaw_kernel(double s, double t) noexcept {
  const double c = std::cos(s) + std::cos(t);
  const double u = std::numbers::pi * (std::sin(s) + std::sin(t));
  const double sinc = u == 0.0 ? 1.0 : std::sin(u) / u;
  return c * c * sinc * sinc;
}

double shaw_solution(double t) noexcept {
  return 2.0 * std::exp(-6.0 * (t - 0.8) * (t - 0.8)) + std::exp(-2.0 * (t + 0.5) * (t + 0.5));
}

ProblemInstance gen_shaw(std::size_t n) {
  if (n < 2) throw InputError("shaw: n must be at least 2");
  const double h = std::numbers::pi / static_cast<double>(n);
  Vector grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = -std::numbers::pi / 2.0 + (static_cast<double>(i) + 0.5) * h;
  RowMatrix A(n, n);
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) A(i, j) = h * shaw_kernel(grid[i], grid[j]);
    x[i] = shaw_solution(grid[i]);
  }
  return make_instance("s-shaw", std::move(A), std::move(x));
}

ProblemInstance gen_gravity(std::size_t n, double d) {
  if (n < 2) throw InputError("gravity: n must be at least 2");
  if (!(d > 0.0)) throw InputError("gravity: depth d must be positive");
  const double h = 1.0 / static_cast<double>(n);
  RowMatrix A(n, n);
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (static_cast<double>(i) + 0.5) * h;
    for (std::size_t j = 0; j < n; ++j) {
      const double t = (static_cast<double>(j) + 0.5) * h;
      A(i, j) = h * d * std::pow(d * d + (s - t) * (s - t), -1.5);
    }
    x[i] = std::sin(std::numbers::pi * s) + 0.5 * std::sin(2.0 * std::numbers::pi * s);
  }
  return make_instance("s-gravity", std::move(A), std::move(x));
}

double phillips_phi(double x) noexcept {
  return std::abs(x) < 3.0 ? 1.0 + std::cos(std::numbers::pi * x / 3.0) : 0.0;
}

ProblemInstance gen_phillips(std::size_t n) {
  if (n < 4 || n % 4 != 0) throw InputError("phillips: n must be a positive multiple of 4");
  using Quad = boost::math::quadrature::gauss<double, 64>;
  const double h = 12.0 / static_cast<double>(n);
  RowMatrix A(n, n);
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = -6.0 + (static_cast<double>(i) + 0.5) * h;
    for (std::size_t j = 0; j < n; ++j) {
      const double lo = std::max(-6.0 + static_cast<double>(j) * h, s - 3.0);
      const double hi = std::min(-6.0 + static_cast<double>(j + 1) * h, s + 3.0);
      A(i, j) = hi > lo ? Quad::integrate([s](double t) { return phillips_phi(s - t); }, lo, hi) : 0.0;
    }
    x[i] = phillips_phi(s);
  }
  return make_instance("s-phillips", std::move(A), std::move(x));
}

ProblemInstance generate_problem(const std::string& name, std::size_t n) {
  std::string key = name.rfind("s-", 0) == 0 ? name.substr(2) : name;
  if (key == "shaw") return gen_shaw(n);
  if (key == "gravity") return gen_gravity(n);
  if (key == "phillips") return gen_phillips(n);
  throw InputError("unknown problem '" + name + "' (expected s-shaw, s-gravity or s-phillips)");
}

ProblemInstance smooth_solution(const ProblemInstance& inst, double nu) {
  if (!(nu >= 0.0)) throw InputError("smooth_solution: nu must be nonnegative");
  const Vector& xe = inst.x_dag;
  if (!(linf(xe) > 0.0)) throw DegenerateInputError("smooth_solution: x_e is zero");
  // (A^t A)^nu = n^nu B^nu; the scalar factor cancels in the normalization.
  Vector v = nu == 0.0 ? Vector(xe) : GramOperator(inst.A).power(nu, xe);
  const double scale = linf(v);
  if (!(scale > 1e-300) || !std::isfinite(scale))
    throw DegenerateInputError("smooth_solution: (A^t A)^nu x_e is numerically zero");
  ProblemInstance out = inst;
  out.x_dag = v / scale;
  out.nu = nu;
  kernel::matvec(out.A.matrix(), out.x_dag, out.y_dag);
  return out;
}

SourceElement source_element(const ProblemInstance& inst, double nu) {
  return source_element(inst, GramOperator(inst.A), nu);
}

SourceElement source_element(const ProblemInstance& inst, const GramOperator& B, double nu) {
  if (!(nu >= 0.0)) throw InputError("source_element: nu must be nonnegative");
  const Vector target = inst.x_dag - inst.x0;
  SourceElement s;
  s.nu = nu;
  if (nu == 0.0) {
    s.w = target;
  } else {
    s.w = B.power(-nu, target);
    s.residual = (B.power(nu, s.w) - target).norm();
  }
  s.norm_w = s.w.norm();
  const double tn = target.norm();
  if (s.residual > 1e-8 * tn)
    throw RangeViolationError("source_element: x_dag - x0 is not in the range of B^nu at nu = " +
                              std::to_string(nu) + " (residual " + std::to_string(s.residual) + ")");
  return s;
}

NoisyData make_data(const ProblemInstance& inst, Vector y_delta, double epsilon, std::uint64_t seed) {
  NoisyData d;
  d.y_delta = std::move(y_delta);
  d.delta = (d.y_delta - inst.y_dag).norm();
  d.delta_bar = d.delta / std::sqrt(static_cast<double>(inst.n()));
  d.epsilon = epsilon;
  d.seed = seed;
  return d;
}

NoisyData add_noise(const ProblemInstance& inst, double epsilon, std::uint64_t seed) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InputError("add_noise: epsilon must be nonnegative");
  Vector y = inst.y_dag;
  if (epsilon > 0.0) {
    const double scale = epsilon * linf(inst.y_dag);
    const CounterStream stream(seed, kNoiseStream);
    for (Eigen::Index i = 0; i < y.size(); ++i)
      y[i] = y[i] + scale * standard_normal(stream, static_cast<std::uint64_t>(i));
  }
  return make_data(inst, std::move(y), epsilon, seed);
}

PreconditionedSystem precondition(const ProblemInstance& inst, const Vector& y) {
  if (static_cast<std::size_t>(y.size()) != inst.n()) throw InputError("precondition: y length must equal n");
  const Matrix a = inst.A.matrix();
  Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (dec.info() != Eigen::Success) throw NumericalError("precondition: SVD did not converge");
  const auto n = a.rows();
  const auto m = a.cols();
  const Vector& sv = dec.singularValues();
  const Matrix& V = dec.matrixV();
  RowMatrix at = RowMatrix::Zero(n, m);
  for (Eigen::Index i = 0; i < sv.size(); ++i) at.row(i) = sv[i] * V.col(i).transpose();
  const Matrix& U = dec.matrixU();
  PreconditionedSystem out;
  out.inst.name = inst.name;
  out.inst.A = DesignMatrix(std::move(at));
  out.inst.x_dag = inst.x_dag;
  out.inst.x0 = inst.x0;
  out.inst.y_dag = U.transpose() * inst.y_dag;
  out.inst.nu = inst.nu;
  out.inst.preconditioned = true;
  out.y = U.transpose() * y;
  return out;
}

NoisyData precondition_data(const ProblemInstance& inst, const NoisyData& data, ProblemInstance* out_inst) {
  auto sys = precondition(inst, data.y_delta);
  NoisyData d = make_data(sys.inst, std::move(sys.y), data.epsilon, data.seed);
  if (out_inst) *out_inst = std::move(sys.inst);
  return d;
}

ProblemInstance normalize(const ProblemInstance& inst) {
  const double nb = GramOperator(inst.A).norm();
  if (!(nb > 0.0)) throw DegenerateInputError("normalize: A is zero");
  RowMatrix a = inst.A.matrix() / std::sqrt(nb);
  ProblemInstance out = make_instance(inst.name, std::move(a), inst.x_dag, inst.x0);
  out.nu = inst.nu;
  out.preconditioned = inst.preconditioned;
  return out;
}

}  // namespace stochreg
