#include "stochreg/exact.hpp"

#include "stochreg/bounds.hpp"
#include "stochreg/errors.hpp"
#include "stochreg/parallel.hpp"
#include "updates.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace stochreg {

namespace {

double parse_number(std::string s, const std::string& ctx) {
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') s = s.substr(1, s.size() - 2);
  const auto slash = s.find('/');
  auto one = [&](const std::string& t) {
    double v = 0.0;
    const auto* end = t.data() + t.size();
    auto [p, ec] = std::from_chars(t.data(), end, v);
    if (t.empty() || ec != std::errc() || p != end) throw InputError("cannot parse number '" + t + "' in " + ctx);
    return v;
  };
  if (slash == std::string::npos) return one(s);
  const double den = one(s.substr(slash + 1));
  if (den == 0.0) throw InputError("zero denominator in " + ctx);
  return one(s.substr(0, slash)) / den;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void check_stochastic(Method method, const char* who) {
  if (method == Method::landweber)
    throw InputError(std::string(who) + ": method must be sgd or svrg");
}

void check_shape(const ProblemInstance& inst, const Vector& y, std::size_t M) {
  if (static_cast<std::size_t>(y.size()) != inst.n()) throw InputError("data length does not match the instance");
  if (M < 1) throw InputError("M must be positive");
}

// Iterates along one index path, one step at a time. SVRG anchors are kept
// per outer loop so that siblings see the anchor of their own loop.
class Walker {
 public:
  Walker(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M, std::size_t L, Method method,
         double gap_sign = 1.0)
      : A_(&inst.A), y_(&y), c0_(c0), M_(M), method_(method), gap_sign_(gap_sign),
        hist(L + 1, inst.x0), path(L, 0) {
    if (method_ == Method::svrg) {
      const std::size_t K = (L + M - 1) / M + 1;
      ax_.assign(K, Vector());
      g_.assign(K, Vector());
    }
  }

  void prepare(std::size_t d) {
    if (method_ == Method::svrg && d % M_ == 0)
      kernel::full_gradient(A_->matrix(), hist[d], *y_, ax_[d / M_], r_, g_[d / M_]);
  }

  void descend(std::size_t d, std::size_t i) {
    path[d] = i;
    hist[d + 1] = hist[d];
    double* x = hist[d + 1].data();
    const double* a = A_->row(i).data();
    const auto ii = static_cast<Eigen::Index>(i);
    if (method_ == Method::sgd)
      update::sgd(a, (*y_)[ii], c0_, x, A_->m());
    else
      update::svrg(a, ax_[d / M_][ii], g_[d / M_].data(), c0_, x, A_->m(), gap_sign_);
  }

 private:
  const DesignMatrix* A_;
  const Vector* y_;
  double c0_;
  std::size_t M_;
  Method method_;
  double gap_sign_;
  std::vector<Vector> ax_, g_;
  Vector r_;

 public:
  std::vector<Vector> hist;
  std::vector<std::size_t> path;
};

class Enumerator {
 public:
  Enumerator(Walker w, const LeafFn& leaf, std::size_t L, std::size_t n, std::size_t dim)
      : w_(std::move(w)), leaf_(leaf), L_(L), n_(n), acc_(L, Vector::Zero(dim)), child_(L, Vector::Zero(dim)) {}

  Walker& walker() { return w_; }

  void run(std::size_t d, double* out) {
    if (d == L_) {
      leaf_(std::span<const std::size_t>(w_.path), w_.hist, out);
      return;
    }
    w_.prepare(d);
    Vector& acc = acc_[d];
    acc.setZero();
    for (std::size_t i = 0; i < n_; ++i) {
      w_.descend(d, i);
      run(d + 1, child_[d].data());
      acc += child_[d];
    }
    const double nd = static_cast<double>(n_);
    for (Eigen::Index k = 0; k < acc.size(); ++k) out[k] = acc[k] / nd;
  }

 private:
  Walker w_;
  const LeafFn& leaf_;
  std::size_t L_, n_;
  std::vector<Vector> acc_, child_;
};

struct Setup {
  std::size_t n, m, M, K, L;
  double c0;
  GramOperator B;
  Propagator P;
  NoiseModel noise;
  Vector e0;
};

Setup make_setup(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M, std::size_t K) {
  check_shape(inst, y, M);
  if (!(c0 > 0.0)) throw InputError("c0 must be positive");
  GramOperator B(inst.A);
  Propagator P(B, c0);
  Setup s{inst.n(), inst.m(), M, K, K * M, c0, B, P, noise_model(inst, B, y), inst.x0 - inst.x_dag};
  return s;
}

Vector shift_vector(ShiftSpec R2, const NoiseModel& nm) {
  return R2 == ShiftSpec::zero ? Vector(Vector::Zero(nm.zeta.size())) : nm.b_zeta;
}

// Products with the random operators of one path segment.
struct PathOps {
  const DesignMatrix& A;
  const Matrix& B;
  double c0;
  std::size_t M;

  // N_i v = B v - a_i (a_i, v)
  Vector N(std::size_t i, const Vector& v) const {
    const auto a = Eigen::Map<const Vector>(A.row(i).data(), static_cast<Eigen::Index>(A.m()));
    return B * v - a * a.dot(v);
  }
  // P_q v = v - c0 a_q (a_q, v)
  void P(std::size_t i, Vector& v) const {
    const auto a = Eigen::Map<const Vector>(A.row(i).data(), static_cast<Eigen::Index>(A.m()));
    v -= c0 * a * a.dot(v);
  }
  // H_k v = G_{k+1} N_{i_k} v, G_{k+1} = P_{(j+1)M-1} ... P_{k+1}
  Vector H(std::span<const std::size_t> path, std::size_t k, const Vector& v) const {
    Vector u = N(path[k], v);
    const std::size_t end = (k / M + 1) * M;
    for (std::size_t q = k + 1; q < end; ++q) P(path[q], u);
    return u;
  }
};

}  // namespace

OperatorWord OperatorWord::parse(const std::string& text) {
  OperatorWord w;
  std::string t;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) t += ch;
  if (t.empty()) throw InputError("empty operator word");
  std::size_t pos = 0;
  while (pos <= t.size()) {
    std::size_t next = t.find('*', pos);
    if (next == std::string::npos) next = t.size();
    const std::string f = t.substr(pos, next - pos);
    if (f.empty()) throw InputError("empty factor in operator word '" + text + "'");
    const auto caret = f.find('^');
    const std::string base = f.substr(0, caret);
    const double p = caret == std::string::npos ? 1.0 : parse_number(f.substr(caret + 1), "operator word '" + text + "'");
    if (base == "I") {
      if (caret != std::string::npos) throw InputError("I takes no exponent");
    } else if (base == "B") {
      w.b_power += p;
    } else if (base == "M0") {
      w.m0_power += p;
    } else if (base == "n") {
      if (caret == std::string::npos) throw InputError("n needs an exponent, e.g. n^0.5");
      w.n_power += p;
    } else {
      if (caret != std::string::npos) throw InputError("unknown factor '" + f + "' in operator word");
      w.coeff *= parse_number(f, "operator word '" + text + "'");
    }
    pos = next + 1;
  }
  if (!std::isfinite(w.coeff)) throw InputError("non-finite coefficient in operator word");
  return w;
}

std::string OperatorWord::str() const {
  std::vector<std::string> parts;
  if (coeff != 1.0) parts.push_back(fmt(coeff));
  if (n_power != 0.0) parts.push_back("n^" + fmt(n_power));
  if (b_power == 1.0)
    parts.push_back("B");
  else if (b_power != 0.0)
    parts.push_back("B^" + fmt(b_power));
  if (m0_power == 1.0)
    parts.push_back("M0");
  else if (m0_power != 0.0)
    parts.push_back("M0^" + fmt(m0_power));
  if (parts.empty()) return "I";
  std::string s = parts[0];
  for (std::size_t k = 1; k < parts.size(); ++k) s += "*" + parts[k];
  return s;
}

double OperatorWord::eval(double lambda, double c0, std::size_t n) const noexcept {
  double v = coeff * GramOperator::spectral_power(lambda, b_power);
  if (n_power != 0.0) v *= std::pow(static_cast<double>(n), n_power);
  if (m0_power != 0.0) v *= std::pow(1.0 - c0 * lambda, m0_power);
  return v;
}

Matrix OperatorWord::matrix(const Propagator& M0, std::size_t n) const {
  if (m0_power != std::floor(m0_power) && M0.norm() > 0.0) {
    for (Eigen::Index j = 0; j < M0.gram().eigenvalues().size(); ++j)
      if (M0.eigenvalue(M0.gram().eigenvalues()[j]) < 0.0)
        throw DomainError("fractional M0 power of an operator with negative spectrum");
  }
  const double c0 = M0.c0();
  return M0.gram().function_matrix([&](double l) { return eval(l, c0, n); });
}

ShiftSpec parse_shift(const std::string& text) {
  if (text == "0" || text == "zero") return ShiftSpec::zero;
  if (text == "pinv_zeta" || text == "B^-1zeta" || text == "B^-1*zeta" || text == "bz") return ShiftSpec::pinv_zeta;
  throw InputError("unknown shift '" + text + "' (use 0 or pinv_zeta)");
}

std::string to_string(ShiftSpec s) { return s == ShiftSpec::zero ? "0" : "pinv_zeta"; }

NoiseModel noise_model(const ProblemInstance& inst, const GramOperator& B, const Vector& y) {
  NoiseModel nm;
  Vector ax;
  kernel::matvec(inst.A.matrix(), inst.x_dag, ax);
  nm.xi = y - ax;
  kernel::gradient_from_residual(inst.A.matrix(), nm.xi, nm.zeta);
  nm.b_zeta = B.pinv(nm.zeta);
  return nm;
}

std::uint64_t path_count(std::size_t n, std::size_t L, std::uint64_t budget) {
  if (n == 0) throw InputError("path enumeration needs n >= 1");
  std::uint64_t c = 1;
  for (std::size_t k = 0; k < L; ++k) {
    if (c > budget / n)
      throw InputError("path budget exceeded: n^L = " + std::to_string(n) + "^" + std::to_string(L) + " > " +
                       std::to_string(budget));
    c *= n;
  }
  if (c > budget)
    throw InputError("path budget exceeded: n^L = " + std::to_string(n) + "^" + std::to_string(L) + " > " +
                     std::to_string(budget));
  return c;
}

Vector enumerate_paths(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M, std::size_t K,
                       Method method, std::size_t out_dim, const LeafFn& leaf, std::uint64_t budget,
                       std::size_t threads) {
  check_stochastic(method, "enumerate_paths");
  check_shape(inst, y, M);
  const std::size_t n = inst.n(), L = K * M;
  path_count(n, L, budget);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(out_dim));
  if (L == 0) {
    Walker w(inst, y, c0, M, 0, method);
    leaf(std::span<const std::size_t>(w.path), w.hist, out.data());
    return out;
  }
  std::vector<Vector> top(n, Vector::Zero(static_cast<Eigen::Index>(out_dim)));
  parallel_for(
      n,
      [&](std::size_t i) {
        Enumerator e(Walker(inst, y, c0, M, L, method), leaf, L, n, out_dim);
        e.walker().prepare(0);
        e.walker().descend(0, i);
        e.run(1, top[i].data());
      },
      std::max<std::size_t>(1, threads));
  for (std::size_t i = 0; i < n; ++i) out += top[i];
  return out / static_cast<double>(n);
}

ExactMoments enumerate_exact_moments(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                     std::size_t K, Method method, std::uint64_t budget) {
  const std::size_t m = inst.m(), L = K * M;
  ExactMoments r;
  r.path_count = path_count(inst.n(), L, budget);
  const std::size_t threads = thread_count();
  r.mean = enumerate_paths(
      inst, y, c0, M, K, method, m,
      [&](std::span<const std::size_t>, const std::vector<Vector>& hist, double* out) {
        std::copy(hist[L].data(), hist[L].data() + m, out);
      },
      budget, threads);
  const Vector mean = r.mean;
  const Vector s = enumerate_paths(
      inst, y, c0, M, K, method, 2,
      [&](std::span<const std::size_t>, const std::vector<Vector>& hist, double* out) {
        out[0] = kernel::dist_sq(hist[L], mean);
        out[1] = kernel::norm_sq(hist[L]);
      },
      budget, threads);
  r.variance_trace = s[0];
  r.second_moment_trace = s[1];
  return r;
}

ErrorMoments propagate_error_moments(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                     std::size_t K, Method method) {
  check_stochastic(method, "propagate_error_moments");
  const Setup s = make_setup(inst, y, c0, M, K);
  const auto m = static_cast<Eigen::Index>(s.m);
  const bool svrg = method == Method::svrg;
  const Eigen::Index d = svrg ? 2 * m + 1 : m + 1;
  const Eigen::Index one = d - 1;
  Vector z0 = Vector::Zero(d);
  z0.head(m) = s.e0;
  if (svrg) z0.segment(m, m) = s.e0;
  z0[one] = 1.0;
  Matrix S = z0 * z0.transpose();

  const Matrix& B = s.B.matrix();
  const Matrix I = Matrix::Identity(m, m);
  std::vector<Matrix> T(s.n, Matrix::Zero(d, d));
  for (std::size_t i = 0; i < s.n; ++i) {
    const auto a = Eigen::Map<const Vector>(inst.A.row(i).data(), m);
    Matrix& Ti = T[i];
    Ti.topLeftCorner(m, m) = I - c0 * a * a.transpose();
    Ti(one, one) = 1.0;
    if (svrg) {
      Ti.block(0, m, m, m) = -c0 * (B - a * a.transpose());
      Ti.block(m, m, m, m) = I;
      Ti.block(0, one, m, 1) = c0 * s.noise.zeta;
    } else {
      Ti.block(0, one, m, 1) = c0 * a * s.noise.xi[static_cast<Eigen::Index>(i)];
    }
  }
  Matrix J;
  if (svrg) {
    J = Matrix::Zero(d, d);
    J.block(0, 0, m, m) = I;
    J.block(m, 0, m, m) = I;
    J(one, one) = 1.0;
  }
  Matrix next(d, d);
  for (std::size_t k = 0; k < s.L; ++k) {
    if (svrg && k % M == 0) S = J * S * J.transpose();
    next.setZero();
    for (std::size_t i = 0; i < s.n; ++i) next.noalias() += T[i] * S * T[i].transpose();
    S = next / static_cast<double>(s.n);
  }
  ErrorMoments r;
  r.mean = S.block(0, one, m, 1);
  r.second = S.topLeftCorner(m, m);
  return r;
}

Vector closed_form_mean(const GramOperator& B, const Vector& x_dag, const Vector& e0, const Vector& zeta, double c0,
                        std::size_t M, std::size_t K) {
  if (K == 0) return x_dag + e0;
  const Propagator P(B, c0);
  const double k = static_cast<double>(K * M);
  return x_dag + P.power(k, e0) + P.step_sum(k, zeta);
}

Vector closed_form_mean(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M, std::size_t K) {
  check_shape(inst, y, M);
  if (K == 0) return inst.x0;
  const GramOperator B(inst.A);
  const NoiseModel nm = noise_model(inst, B, y);
  return closed_form_mean(B, inst.x_dag, inst.x0 - inst.x_dag, nm.zeta, c0, M, K);
}

double expected_weighted_residual(const ErrorMoments& mom, const Matrix& R1, const Vector& r1_bz, const Vector& r2) {
  const Vector c = r2 - r1_bz;
  const double tr = (R1 * mom.second * R1.transpose()).trace();
  return tr + 2.0 * c.dot(R1 * mom.mean) + c.squaredNorm();
}

double enumerate_weighted_residual(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                   std::size_t K, Method method, const OperatorWord& R1, ShiftSpec R2,
                                   std::uint64_t budget) {
  const Setup s = make_setup(inst, y, c0, M, K);
  const Matrix R = R1.matrix(s.P, s.n);
  const Vector r2 = shift_vector(R2, s.noise);
  const Vector target = inst.x_dag + s.noise.b_zeta;
  const std::size_t L = s.L;
  const Vector v = enumerate_paths(
      inst, y, c0, M, K, method, 1,
      [&](std::span<const std::size_t>, const std::vector<Vector>& hist, double* out) {
        out[0] = (R * (hist[L] - target) + r2).squaredNorm();
      },
      budget, thread_count());
  return v[0];
}

double propagate_weighted_residual(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                   std::size_t K, Method method, const OperatorWord& R1, ShiftSpec R2) {
  const Setup s = make_setup(inst, y, c0, M, K);
  const Matrix R = R1.matrix(s.P, s.n);
  const ErrorMoments mom = propagate_error_moments(inst, y, c0, M, K, method);
  return expected_weighted_residual(mom, R, R * s.noise.b_zeta, shift_vector(R2, s.noise));
}

namespace {

struct DecompContext {
  Setup s;
  Matrix R;
  Vector r2;
  std::vector<Matrix> M0pow;  // M0^t, t = 0..M
  std::vector<Matrix> W;      // R1 M0^{(K-1-j)M}
  double I0 = 0.0;
};

DecompContext decomp_context(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M, std::size_t K,
                             const OperatorWord& R1, ShiftSpec R2, const char* who) {
  if (!rows_orthogonal(inst.A))
    throw AssumptionViolationError(std::string(who) + ": rows of A are not orthogonal (precondition the instance)");
  if (K < 1) throw InputError(std::string(who) + ": K must be positive");
  DecompContext c{make_setup(inst, y, c0, M, K), Matrix(), Vector(), {}, {}, 0.0};
  c.R = R1.matrix(c.s.P, c.s.n);
  c.r2 = shift_vector(R2, c.s.noise);
  for (std::size_t t = 0; t <= M; ++t) c.M0pow.push_back(c.s.P.power_matrix(static_cast<double>(t)));
  for (std::size_t j = 0; j < K; ++j)
    c.W.push_back(c.R * c.s.P.power_matrix(static_cast<double>((K - 1 - j) * M)));
  const Vector base = c.s.P.power(static_cast<double>(K * M), c.s.e0 - c.s.noise.b_zeta);
  c.I0 = (c.R * base + c.r2).squaredNorm();
  return c;
}

}  // namespace

SvrgVarianceTerms svrg_variance_terms(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                      std::size_t K, const OperatorWord& R1, ShiftSpec R2, std::uint64_t budget) {
  const DecompContext c = decomp_context(inst, y, c0, M, K, R1, R2, "svrg_variance_terms");
  const PathOps ops{inst.A, c.s.B.matrix(), c0, M};
  const Matrix I = Matrix::Identity(static_cast<Eigen::Index>(c.s.m), static_cast<Eigen::Index>(c.s.m));
  std::vector<Matrix> Q;
  for (std::size_t i = 0; i < M; ++i) Q.push_back(I - c.M0pow[i]);
  const Vector target = inst.x_dag + c.s.noise.b_zeta;
  const std::size_t L = c.s.L;
  const double c02 = c0 * c0;

  const Vector v = enumerate_paths(
      inst, y, c0, M, K, Method::svrg, K + 2,
      [&](std::span<const std::size_t> path, const std::vector<Vector>& hist, double* out) {
        Vector sum = Vector::Zero(static_cast<Eigen::Index>(c.s.m));
        for (std::size_t j = 0; j < K; ++j) {
          const Vector u = hist[j * M] - target;
          double acc = 0.0;
          for (std::size_t i = 1; i < M; ++i) {
            const Vector t = c.W[j] * ops.H(path, j * M + i, Q[i] * u);
            acc += t.squaredNorm();
            sum += t;
          }
          out[j] = c02 * acc;
        }
        out[K] = (c.R * (hist[L] - target) + c.r2).squaredNorm();
        out[K + 1] = c02 * sum.squaredNorm();
      },
      budget, thread_count());

  SvrgVarianceTerms r;
  r.I0 = c.I0;
  r.total = c.I0;
  for (std::size_t j = 0; j < K; ++j) {
    r.I1.push_back(v[static_cast<Eigen::Index>(j)]);
    r.total += r.I1.back();
  }
  r.enumerated = v[static_cast<Eigen::Index>(K)];
  r.pathwise = c.I0 + v[static_cast<Eigen::Index>(K + 1)];
  return r;
}

SgdVarianceTerms sgd_variance_terms(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                    std::size_t K, const OperatorWord& R1, ShiftSpec R2, std::uint64_t budget) {
  const DecompContext c = decomp_context(inst, y, c0, M, K, R1, R2, "sgd_variance_terms");
  const PathOps ops{inst.A, c.s.B.matrix(), c0, M};
  const Vector& bz = c.s.noise.b_zeta;
  const Vector& zeta = c.s.noise.zeta;
  const Vector& xi = c.s.noise.xi;
  const Vector target = inst.x_dag + bz;
  const std::size_t L = c.s.L;
  const auto m = static_cast<Eigen::Index>(c.s.m);
  const double c02 = c0 * c0;
  auto zeta_k = [&](std::size_t i) {
    const auto a = Eigen::Map<const Vector>(inst.A.row(i).data(), m);
    return Vector(a * xi[static_cast<Eigen::Index>(i)] - zeta);
  };

  const Vector v = enumerate_paths(
      inst, y, c0, M, K, Method::sgd, 2 * K + 2,
      [&](std::span<const std::size_t> path, const std::vector<Vector>& hist, double* out) {
        Vector sum = Vector::Zero(m);
        for (std::size_t j = 0; j < K; ++j) {
          const Vector u = hist[j * M] - target;
          double a2 = 0.0, a3 = 0.0;
          for (std::size_t i = 0; i < M; ++i) {
            const std::size_t k = j * M + i;
            const Vector x = c.W[j] * (ops.H(path, k, c.M0pow[i] * u + bz) + c.M0pow[M - i - 1] * zeta_k(path[k]));
            a2 += x.squaredNorm();
            sum += c0 * x;
            for (std::size_t t = 0; t < i; ++t) {
              const Vector w = c.W[j] * ops.H(path, k, c.M0pow[t] * zeta_k(path[k - 1 - t]));
              a3 += w.squaredNorm();
              sum += c02 * w;
            }
          }
          out[j] = c02 * a2;
          out[K + j] = c02 * c02 * a3;
        }
        out[2 * K] = (c.R * (hist[L] - target) + c.r2).squaredNorm();
        out[2 * K + 1] = sum.squaredNorm();
      },
      budget, thread_count());

  SgdVarianceTerms r;
  r.I0 = c.I0;
  r.total = c.I0;
  for (std::size_t j = 0; j < K; ++j) {
    r.I2.push_back(v[static_cast<Eigen::Index>(j)]);
    r.I3.push_back(v[static_cast<Eigen::Index>(K + j)]);
    r.total += r.I2.back() + r.I3.back();
  }
  r.enumerated = v[static_cast<Eigen::Index>(2 * K)];
  r.pathwise = c.I0 + v[static_cast<Eigen::Index>(2 * K + 1)];
  return r;
}

namespace {

struct McValue {
  double mean = 0.0;
  double standard_error = 0.0;
};

McValue mc_weighted_residual(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M, std::size_t K,
                             Method method, const Matrix& R, const Vector& target, const Vector& r2,
                             std::size_t runs, std::uint64_t seed) {
  if (runs < 2) throw InputError("Monte Carlo comparison needs at least 2 runs");
  const EpochAccounting acc = epoch_accounting(method, inst.n(), M);
  const std::uint64_t L = K * M;
  SolverConfig cfg;
  cfg.method = method;
  cfg.c0 = c0;
  cfg.M = M;
  cfg.max_epochs = acc.epoch(L);
  cfg.seed = seed;
  cfg.checkpoint_iterations = {L};
  cfg.store_iterates = true;
  cfg.record_residual = false;
  cfg.allow_inadmissible_step = true;
  std::vector<double> vals(runs, 0.0);
  parallel_for(runs, [&](std::size_t r) {
    SolverConfig c = cfg;
    c.stream = r;
    const Trajectory t = solve(inst, y, c);
    const Checkpoint& last = t.checkpoints.back();
    if (last.iteration != L) throw NumericalError("Monte Carlo run stopped before the target iteration");
    vals[r] = (R * (last.iterate - target) + r2).squaredNorm();
  });
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(runs);
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(runs - 1);
  return {mean, std::sqrt(var / static_cast<double>(runs))};
}

}  // namespace

VarianceComparison variance_compare(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                    std::size_t K, const OperatorWord& R1, ShiftSpec R2, CompareRoute route,
                                    std::size_t mc_runs, std::uint64_t seed) {
  if (!rows_orthogonal(inst.A))
    throw AssumptionViolationError("variance_compare: rows of A are not orthogonal (precondition the instance)");
  const Setup s = make_setup(inst, y, c0, M, K);
  VarianceComparison r;
  try {
    r.condition_holds = condition_report(s.n, s.B.norm(), c0, M, 0.0).compare_holds();
  } catch (const DomainError&) {
    r.condition_holds = false;
  }
  if (route == CompareRoute::automatic) {
    bool small = true;
    try {
      path_count(s.n, s.L, kPathBudget);
    } catch (const InputError&) {
      small = false;
    }
    route = small ? CompareRoute::enumeration : (s.m <= 64 ? CompareRoute::propagation : CompareRoute::monte_carlo);
  }
  const double tol = 1e-12;
  switch (route) {
    case CompareRoute::enumeration:
      r.route = "enumeration";
      r.svrg_value = enumerate_weighted_residual(inst, y, c0, M, K, Method::svrg, R1, R2);
      r.sgd_value = enumerate_weighted_residual(inst, y, c0, M, K, Method::sgd, R1, R2);
      r.ordered = r.svrg_value <= r.sgd_value + tol * std::max(1.0, std::abs(r.sgd_value));
      break;
    case CompareRoute::propagation:
      r.route = "propagation";
      r.svrg_value = propagate_weighted_residual(inst, y, c0, M, K, Method::svrg, R1, R2);
      r.sgd_value = propagate_weighted_residual(inst, y, c0, M, K, Method::sgd, R1, R2);
      r.ordered = r.svrg_value <= r.sgd_value + tol * std::max(1.0, std::abs(r.sgd_value));
      break;
    default: {
      r.route = "monte-carlo";
      const Matrix R = R1.matrix(s.P, s.n);
      const Vector target = inst.x_dag + s.noise.b_zeta;
      const Vector r2 = shift_vector(R2, s.noise);
      const McValue a = mc_weighted_residual(inst, y, c0, M, K, Method::svrg, R, target, r2, mc_runs, seed);
      const McValue b = mc_weighted_residual(inst, y, c0, M, K, Method::sgd, R, target, r2, mc_runs, seed);
      r.svrg_value = a.mean;
      r.sgd_value = b.mean;
      r.standard_error = std::hypot(a.standard_error, b.standard_error);
      r.ordered = r.svrg_value <= r.sgd_value + 3.0 * r.standard_error;
    }
  }
  return r;
}

OrthogonalityReport orthogonality_check(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                        std::size_t K, std::uint64_t budget) {
  const Setup s = make_setup(inst, y, c0, M, K);
  OrthogonalityReport r;
  const std::size_t P = K * M;
  const PathOps ops{inst.A, s.B.matrix(), c0, M};
  const std::size_t dim = P * (P + 1) / 2;
  if (dim == 0) return r;
  const Vector v = enumerate_paths(
      inst, y, c0, M, K, Method::svrg, dim,
      [&](std::span<const std::size_t> path, const std::vector<Vector>& hist, double* out) {
        std::vector<Vector> h(P);
        for (std::size_t j = 0; j < K; ++j)
          for (std::size_t i = 0; i < M; ++i) h[j * M + i] = ops.H(path, j * M + i, hist[j * M] - inst.x_dag);
        std::size_t q = 0;
        for (std::size_t a = 0; a < P; ++a)
          for (std::size_t b = a; b < P; ++b) out[q++] = h[a].dot(h[b]);
      },
      budget, thread_count());
  std::size_t q = 0;
  for (std::size_t a = 0; a < P; ++a)
    for (std::size_t b = a; b < P; ++b, ++q) {
      const double x = v[static_cast<Eigen::Index>(q)];
      if (a == b)
        r.scale = std::max(r.scale, x);
      else
        r.max_cross_term = std::max(r.max_cross_term, std::abs(x));
    }
  return r;
}

RecursionReport recursion_check(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                std::uint64_t seed, std::size_t K, double gap_sign) {
  const Setup s = make_setup(inst, y, c0, M, K);
  const auto m = static_cast<Eigen::Index>(s.m);
  const Matrix I = Matrix::Identity(m, m);
  const Matrix& B = s.B.matrix();
  const Matrix Bp = s.B.power_matrix(-1.0);
  const Vector& zeta = s.noise.zeta;
  std::vector<Matrix> M0pow;
  for (std::size_t t = 0; t <= M; ++t) M0pow.push_back(s.P.power_matrix(static_cast<double>(t)));

  // Literal replay of the (possibly mutated) iteration along one seeded path.
  const IndexStream idx(seed, 0, s.n);
  Walker w(inst, y, c0, M, s.L, Method::svrg, gap_sign);
  for (std::size_t k = 0; k < s.L; ++k) {
    w.prepare(k);
    w.descend(k, idx[k]);
  }
  auto rank1 = [&](std::size_t i) {
    const auto a = Eigen::Map<const Vector>(inst.A.row(i).data(), m);
    return Matrix(a * a.transpose());
  };

  RecursionReport r;
  for (std::size_t J = 0; J < K; ++J) {
    const std::size_t base = J * M;
    const Vector e = w.hist[base] - inst.x_dag;
    r.scale = std::max(r.scale, e.norm());
    std::vector<Matrix> Pq(M), Nq(M);
    for (std::size_t i = 0; i < M; ++i) {
      const Matrix aa = rank1(w.path[base + i]);
      Pq[i] = I - c0 * aa;
      Nq[i] = B - aa;
    }
    // G[i] = P_{M-1} ... P_i for i = 1..M, G[M] = I
    std::vector<Matrix> G(M + 1, I);
    for (std::size_t i = M - 1; i >= 1; --i) G[i] = G[i + 1] * Pq[i];
    std::vector<Matrix> H(M);
    for (std::size_t i = 0; i < M; ++i) H[i] = G[i + 1] * Nq[i];
    for (std::size_t i = 1; i < M; ++i) {
      Matrix rhs = M0pow[M - i];
      for (std::size_t j = 0; j + i < M; ++j) rhs += c0 * H[i + j] * M0pow[j];
      r.max_g_deviation = std::max(r.max_g_deviation, (G[i] - rhs).cwiseAbs().maxCoeff());
    }
    Matrix Lk = Matrix::Zero(m, m);
    for (std::size_t i = 1; i < M; ++i) Lk += c0 * H[i] * (I - M0pow[i]) * Bp;
    Matrix S = Matrix::Zero(m, m);
    for (std::size_t i = 0; i < M; ++i) S += c0 * M0pow[i];
    const Vector pred = (M0pow[M] - Lk * B) * e + (S + Lk) * zeta;
    const Vector actual = w.hist[base + M] - inst.x_dag;
    r.max_deviation = std::max(r.max_deviation, (pred - actual).cwiseAbs().maxCoeff());
    const Vector step = M0pow[1] * e + c0 * zeta;
    r.max_anchor_step = std::max(r.max_anchor_step, (step - (w.hist[base + 1] - inst.x_dag)).cwiseAbs().maxCoeff());
  }
  return r;
}

double commutator_check(const DesignMatrix& A) {
  const auto m = static_cast<Eigen::Index>(A.m());
  std::vector<Matrix> R;
  double scale = 1.0;
  for (std::size_t i = 0; i < A.n(); ++i) {
    const auto a = Eigen::Map<const Vector>(A.row(i).data(), m);
    R.push_back(a * a.transpose());
    scale = std::max(scale, a.squaredNorm() * a.squaredNorm());
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < R.size(); ++i)
    for (std::size_t j = i + 1; j < R.size(); ++j)
      worst = std::max(worst, (R[i] * R[j] - R[j] * R[i]).norm());
  return worst / scale;
}

bool rows_orthogonal(const DesignMatrix& A, double tol) {
  const RowMatrix& a = A.matrix();
  const Matrix G = a * a.transpose();
  const double scale = std::max(1.0, A.max_row_norm_sq());
  for (Eigen::Index i = 0; i < G.rows(); ++i)
    for (Eigen::Index j = i + 1; j < G.cols(); ++j)
      if (std::abs(G(i, j)) > tol * scale) return false;
  return true;
}

Matrix row_basis(const DesignMatrix& A) {
  const auto m = static_cast<Eigen::Index>(A.m());
  const double tiny = 1e-12 * std::sqrt(std::max(A.max_row_norm_sq(), std::numeric_limits<double>::min()));
  Matrix lead(m, 0);
  for (std::size_t i = 0; i < A.n() && lead.cols() < m; ++i) {
    const auto a = Eigen::Map<const Vector>(A.row(i).data(), m);
    const double nrm = a.norm();
    if (nrm <= tiny) continue;
    lead.conservativeResize(m, lead.cols() + 1);
    lead.col(lead.cols() - 1) = a / nrm;
  }
  const Eigen::Index r = lead.cols();
  if (r == m) return lead;
  if (r == 0) return Matrix::Identity(m, m);
  Matrix full(m, m);
  full.leftCols(r) = lead;
  // Complete with the orthogonal complement of the leading columns.
  Eigen::HouseholderQR<Matrix> qr(lead);
  const Matrix Q = qr.householderQ() * Matrix::Identity(m, m);
  full.rightCols(m - r) = Q.rightCols(m - r);
  return full;
}

RowFactorReport row_factor_check(const ProblemInstance& inst, const Vector& y, const Vector& diag, const Vector& v) {
  const auto m = static_cast<Eigen::Index>(inst.m());
  if (diag.size() != m || v.size() != m) throw InputError("row_factor_check: diag and v must have length m");
  if (!rows_orthogonal(inst.A)) throw AssumptionViolationError("row_factor_check: rows of A are not orthogonal");
  const GramOperator B(inst.A);
  const NoiseModel nm = noise_model(inst, B, y);
  const Matrix V = row_basis(inst.A);
  const Matrix W = V * diag.asDiagonal() * V.transpose();
  const std::size_t n = inst.n();
  const double nd = static_cast<double>(n);
  const PathOps ops{inst.A, B.matrix(), 1.0, 1};
  RowFactorReport r;
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = Eigen::Map<const Vector>(inst.A.row(i).data(), m);
    r.n_lhs += (W * ops.N(i, v)).squaredNorm();
    r.zeta_lhs += (W * (a * nm.xi[static_cast<Eigen::Index>(i)] - nm.zeta)).squaredNorm();
  }
  r.n_lhs /= nd;
  r.zeta_lhs /= nd;
  r.n_rhs = (nd - 1.0) * (W * (B.matrix() * v)).squaredNorm();
  r.zeta_rhs = (nd - 1.0) * (W * nm.zeta).squaredNorm();
  const double s1 = std::max({1.0, r.n_lhs, r.n_rhs});
  const double s2 = std::max({1.0, r.zeta_lhs, r.zeta_rhs});
  r.max_deviation = std::max(std::abs(r.n_lhs - r.n_rhs) / s1, std::abs(r.zeta_lhs - r.zeta_rhs) / s2);
  return r;
}

double step_sum_identity_check(const GramOperator& B, double c0, std::size_t j, const Vector& v) {
  const Matrix M0 = Matrix::Identity(v.size(), v.size()) - c0 * B.matrix();
  Vector acc = Vector::Zero(v.size());
  Vector t = v;
  for (std::size_t i = 0; i < j; ++i) {
    acc += c0 * t;
    t = M0 * t;
  }
  // B^-1 only exists on the range, so compare there.
  const Vector lhs = B.apply([](double l) { return l > 0.0 ? 1.0 : 0.0; }, acc);
  const double jd = static_cast<double>(j);
  const Vector rhs =
      B.apply([&](double l) { return l > 0.0 ? -std::expm1(jd * std::log1p(-c0 * l)) / l : 0.0; }, v);
  const double scale = std::max(lhs.norm(), rhs.norm());
  return scale > 0.0 ? (lhs - rhs).norm() / scale : 0.0;
}

}  // namespace stochreg
