#pragma once

#include "stochreg/linalg.hpp"
#include "stochreg/problems.hpp"
#include "stochreg/random.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace stochreg {

enum class Method { landweber, sgd, svrg };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct SolverConfig {
  Method method = Method::svrg;
  // Step on J(x) = (2n)^-1 |Ax - y|^2 for every method; Landweber therefore
  // takes x - c0 n^-1 A^t (Ax - y).
  double c0 = 0.0;
  std::size_t M = 1;
  double max_epochs = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  // SGD checkpoint stride in epochs. Landweber checkpoints every step and SVRG
  // at every anchor.
  double checkpoint_every = 1.0;
  // Explicit iteration counts to record (iteration 0 is always recorded).
  std::vector<std::uint64_t> checkpoint_iterations;
  bool store_iterates = false;
  bool record_residual = true;
  bool allow_inadmissible_step = false;
  // |B| if already known; computed from A otherwise.
  std::optional<double> gram_norm;
};

struct Checkpoint {
  double epoch = 0.0;
  std::uint64_t iteration = 0;
  double error_sq = 0.0;
  double residual_sq = 0.0;
  Vector iterate;
};

struct Trajectory {
  std::vector<Checkpoint> checkpoints;
  double k_star = 0.0;
  double e_at_k_star = 0.0;
  bool step_admissible = true;
};

struct EpochAccounting {
  Method method = Method::sgd;
  std::size_t n = 1;
  std::size_t M = 1;
  double iterations_per_epoch = 1.0;

  double epoch(std::uint64_t iteration) const noexcept;
  // Largest iteration count whose epoch does not exceed the budget.
  std::uint64_t iterations_within(double epochs) const noexcept;
};

EpochAccounting epoch_accounting(Method method, std::size_t n, std::size_t M);

Trajectory landweber_run(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg);
Trajectory sgd_run(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg);
Trajectory svrg_run(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg);
Trajectory solve(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg);

// The index stream a run with this config draws from.
IndexStream run_index_stream(const SolverConfig& cfg, std::size_t n);

// argmin of error_sq over the checkpoints; ties go to the smaller epoch.
std::pair<double, double> oracle_stop(const Trajectory& traj);

// Stochastic methods: c0 <= 1 / max(max_i |a_i|^2, |B|^2).
// Landweber: c0 |B| <= 1.
bool step_admissible(Method method, double c0, double max_row_norm_sq, double gram_norm) noexcept;

}  // namespace stochreg
