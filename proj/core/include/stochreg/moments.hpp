#pragma once

#include "stochreg/linalg.hpp"
#include "stochreg/problems.hpp"
#include "stochreg/solvers.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace stochreg {

struct MomentRow {
  double epoch = 0.0;
  std::uint64_t iteration = 0;
  Vector mean_iterate;
  double bias_sq = 0.0;      // |mean - x_dag|^2
  double variance = 0.0;     // sample mean of |x - mean|^2 (1/R)
  double mse = 0.0;          // sample mean of |x - x_dag|^2
  double residual_mse = 0.0; // sample mean of |A x - y|^2
  double mse_standard_error = 0.0;
  double residual_standard_error = 0.0;
  std::size_t run_count = 0;
};

struct MomentReport {
  std::string method;
  std::vector<MomentRow> rows;
  std::size_t runs_requested = 0;
  std::size_t runs_used = 0;
  std::size_t divergent_runs = 0;
  std::vector<std::string> divergence_messages;  // first few only
  std::uint64_t base_seed = 0;
  // Oracle stopping per run, then averaged (the e and k table columns).
  double kstar_mean = 0.0;
  double kstar_standard_error = 0.0;
  double e_kstar_mean = 0.0;
  double e_kstar_standard_error = 0.0;
  // argmin of the mean error curve.
  double curve_kstar = 0.0;
  double curve_e = 0.0;
};

struct McOptions {
  std::size_t threads = 0;  // 0: thread_count()
  // Fresh noise per run from derive_seed(noise_seed, {run}); y is then ignored
  // except for its length.
  bool resample_noise = false;
  double epsilon = 0.0;
  std::uint64_t noise_seed = 0;
};

inline constexpr std::size_t kMcBlock = 16;

// Run r uses index stream r of cfg.seed. Checkpoint epochs, when given, are
// rounded to the nearest iteration; otherwise the solver's default grid is used.
MomentReport mc_moments(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg, std::size_t runs,
                        const std::vector<double>& checkpoint_epochs = {}, const McOptions& opt = {});

}  // namespace stochreg
