#pragma once

#include "stochreg/linalg.hpp"
#include "stochreg/problems.hpp"
#include "stochreg/solvers.hpp"
#include "stochreg/spectral.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace stochreg {

inline constexpr std::uint64_t kPathBudget = 10'000'000;

// Weighting operator R1 as a word over commuting generators:
// coeff * n^n_power * B^b_power * M0^m0_power. Text form: factors joined by
// '*', each one of I, B, B^p, M0, M0^q, n^p or a number, e.g. "n^0.5*B^0.5".
struct OperatorWord {
  double coeff = 1.0;
  double n_power = 0.0;
  double b_power = 0.0;
  double m0_power = 0.0;

  static OperatorWord parse(const std::string& text);
  std::string str() const;
  double eval(double lambda, double c0, std::size_t n) const noexcept;
  Matrix matrix(const Propagator& M0, std::size_t n) const;
};

// Shift R2: zero or B^-1 zeta (pseudo-inverse).
enum class ShiftSpec { zero, pinv_zeta };
ShiftSpec parse_shift(const std::string& text);
std::string to_string(ShiftSpec s);

// Quantities shared by every oracle for one (instance, data, c0).
struct NoiseModel {
  Vector xi;      // y - A x_dag (kernel matvec)
  Vector zeta;    // n^-1 A^t xi
  Vector b_zeta;  // B^-1 zeta
};
NoiseModel noise_model(const ProblemInstance& inst, const GramOperator& B, const Vector& y);

struct ExactMoments {
  Vector mean;
  double second_moment_trace = 0.0;
  double variance_trace = 0.0;
  std::uint64_t path_count = 0;
};

// n^L with an overflow-safe budget check; throws InputError above budget.
std::uint64_t path_count(std::size_t n, std::size_t L, std::uint64_t budget);

// Iterate history handed to enumeration leaves: hist[k] is x_k (k = 0..L).
using LeafFn = std::function<void(std::span<const std::size_t> path, const std::vector<Vector>& hist, double* out)>;

// Average of leaf(path) over all n^{KM} index paths of the given method.
// Each node averages its n children in index order, so the reduction tree is
// fixed; top-level subtrees may run on separate threads without changing bits.
Vector enumerate_paths(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M, std::size_t K,
                       Method method, std::size_t out_dim, const LeafFn& leaf, std::uint64_t budget = kPathBudget,
                       std::size_t threads = 1);

ExactMoments enumerate_exact_moments(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                     std::size_t K, Method method, std::uint64_t budget = kPathBudget);

// First and second moments of the error e_{KM} = x_{KM} - x_dag by exact
// propagation of E[z z^t] for the augmented state z = (e, 1) (SGD) or
// (e, e_anchor, 1) (SVRG). Polynomial cost; no path budget.
struct ErrorMoments {
  Vector mean;    // E[e]
  Matrix second;  // E[e e^t]
};
ErrorMoments propagate_error_moments(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                     std::size_t K, Method method);

// x_dag + M0^{KM} e0 + (I - M0^{KM}) B^-1 zeta
Vector closed_form_mean(const GramOperator& B, const Vector& x_dag, const Vector& e0, const Vector& zeta, double c0,
                        std::size_t M, std::size_t K);
Vector closed_form_mean(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M, std::size_t K);

// E|R1 (e_{KM} - B^-1 zeta) + R2|^2
double expected_weighted_residual(const ErrorMoments& mom, const Matrix& R1, const Vector& r1_bz, const Vector& r2);
double enumerate_weighted_residual(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                   std::size_t K, Method method, const OperatorWord& R1, ShiftSpec R2,
                                   std::uint64_t budget = kPathBudget);
double propagate_weighted_residual(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                   std::size_t K, Method method, const OperatorWord& R1, ShiftSpec R2);

// Variance decompositions with K outer loops (target e_{KM}); entry j of each
// list is the term for inner loop j = 0..K-1, weighted by M0^{(K-1-j)M}.
struct SvrgVarianceTerms {
  double I0 = 0.0;
  std::vector<double> I1;
  double total = 0.0;       // I0 + sum I1
  double enumerated = 0.0;  // E|R1 (e - B^-1 zeta) + R2|^2 over all paths
  double pathwise = 0.0;    // I0 + E|sum of all variance summands|^2
};
struct SgdVarianceTerms {
  double I0 = 0.0;
  std::vector<double> I2;
  std::vector<double> I3;
  double total = 0.0;
  double enumerated = 0.0;
  double pathwise = 0.0;
};

SvrgVarianceTerms svrg_variance_terms(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                      std::size_t K, const OperatorWord& R1, ShiftSpec R2,
                                      std::uint64_t budget = kPathBudget);
SgdVarianceTerms sgd_variance_terms(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                    std::size_t K, const OperatorWord& R1, ShiftSpec R2,
                                    std::uint64_t budget = kPathBudget);

struct VarianceComparison {
  double svrg_value = 0.0;
  double sgd_value = 0.0;
  double standard_error = 0.0;  // combined, Monte Carlo route only
  bool ordered = false;
  bool condition_holds = false;  // comparison condition on M, c0, n
  std::string route;            // "enumeration" | "propagation" | "monte-carlo"
};

enum class CompareRoute { automatic, enumeration, propagation, monte_carlo };

VarianceComparison variance_compare(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                    std::size_t K, const OperatorWord& R1, ShiftSpec R2,
                                    CompareRoute route = CompareRoute::automatic, std::size_t mc_runs = 2000,
                                    std::uint64_t seed = 0);

struct OrthogonalityReport {
  double max_cross_term = 0.0;
  double scale = 0.0;  // max E|H_{jM+i} e_{jM}|^2
};
OrthogonalityReport orthogonality_check(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                        std::size_t K, std::uint64_t budget = kPathBudget);

struct RecursionReport {
  double max_deviation = 0.0;      // recursion vs iterated anchors
  double max_g_deviation = 0.0;    // explicit G products vs the M0/H expansion
  double max_anchor_step = 0.0;    // e_{KM+1} vs M0 e_{KM} + c0 zeta
  double scale = 0.0;              // max |e_{KM}| along the path
};
// gap_sign = -1 flips the sign of the variance-reduction term in the replayed
// iteration (mutation check).
RecursionReport recursion_check(const ProblemInstance& inst, const Vector& y, double c0, std::size_t M,
                                std::uint64_t seed, std::size_t K, double gap_sign = 1.0);

// max_{i,j} |[a_i a_i^t, a_j a_j^t]|_F / max(1, max_i |a_i|^4)
double commutator_check(const DesignMatrix& A);

// Orthonormal basis whose leading columns are the normalized nonzero rows of a
// row-orthogonal A (the V of A = Sigma V^t).
Matrix row_basis(const DesignMatrix& A);

struct RowFactorReport {
  double n_lhs = 0.0, n_rhs = 0.0;        // E|VDV^t N_j v|^2 and (n-1)|VDV^t B v|^2
  double zeta_lhs = 0.0, zeta_rhs = 0.0;  // E|VDV^t (zeta_j - zeta)|^2 and (n-1)|VDV^t zeta|^2
  double max_deviation = 0.0;             // relative to max(1, values)
};
RowFactorReport row_factor_check(const ProblemInstance& inst, const Vector& y, const Vector& diag, const Vector& v);

// c0 sum_{i<j} M0^i v by repeated multiplication vs (I - M0^j) B^-1 v; relative deviation.
double step_sum_identity_check(const GramOperator& B, double c0, std::size_t j, const Vector& v);

bool rows_orthogonal(const DesignMatrix& A, double tol = 1e-12);

}  // namespace stochreg
