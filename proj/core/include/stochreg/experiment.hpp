#pragma once

#include "stochreg/io.hpp"
#include "stochreg/moments.hpp"
#include "stochreg/problems.hpp"
#include "stochreg/solvers.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stochreg {

// c0 expressions: "<r>*c/M", "<r>*c/n", "<r>*c", "c/M", "c", or a literal;
// <r> is a decimal or a fraction p/q. c = 1 / max_i |a_i|^2.
double eval_c0(const std::string& expr, double c, std::size_t n, std::size_t M);
// M expressions: "<r>*n" (rounded to the nearest integer) or a literal.
std::size_t eval_M(const std::string& expr, std::size_t n);

struct MethodSpec {
  Method method = Method::svrg;
  std::string c0_expr;  // empty: landweber uses 1/|B|
  std::string M_expr = "1";
};

struct ExperimentSpec {
  std::string problem = "s-phillips";
  std::size_t n = 200;
  std::vector<double> nu{0.0};
  std::vector<double> epsilon{5e-2};
  std::vector<MethodSpec> methods;
  std::size_t runs = 100;
  double max_epochs = 2000.0;
  std::uint64_t base_seed = 0;
  bool precondition = false;
  bool resample_noise = false;
  bool normalize = false;
  double checkpoint_every = 1.0;
  // Shared iteration grid for every method; empty means each solver's default.
  std::vector<std::uint64_t> checkpoint_iterations;
  bool emit_moments = false;
  // run even when c0 exceeds the conservative row/operator step bound
  bool allow_inadmissible_step = false;

  static ExperimentSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

ExperimentSpec load_experiment_spec(const std::string& path);

struct ResultRow {
  std::string problem;
  double nu = 0.0;
  double epsilon = 0.0;
  std::string method;
  std::string c0_expr;
  double c0 = 0.0;
  std::size_t M = 1;
  std::optional<double> e_at_kstar;
  std::optional<double> kstar;
  std::optional<double> kstar_rounded;
  std::size_t runs = 0;
  std::size_t runs_used = 0;
  std::size_t divergent_runs = 0;
  std::optional<double> standard_error;  // of e; empty for single runs
  std::optional<double> kstar_standard_error;
  std::optional<double> delta = std::nullopt;
  std::string error;

  bool operator==(const ResultRow&) const = default;
};

CsvTable result_table(const std::vector<ResultRow>& rows);
std::vector<ResultRow> result_rows_from_table(const CsvTable& t);

struct CellMoments {
  std::string label;  // e.g. nu1_eps0.001_svrg
  MomentReport report;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<CellMoments> moments;
  std::size_t failures = 0;
};

// Per (nu, epsilon) cell: noise seed derive_seed(base_seed, {cell, noise tag});
// run seeds derive_seed(base_seed, {cell, method index}). c_override replaces
// the step constant c of the solved system.
ExperimentResult run_experiment(const ExperimentSpec& spec, std::optional<double> c_override = std::nullopt);

// Writes results.csv, results.json and (if requested) moments_<label>.csv.
void write_experiment(const std::string& out_dir, const ExperimentSpec& spec, const ExperimentResult& r);

struct PairedRow {
  ResultRow raw;
  ResultRow pre;
  std::optional<double> relative_gap;  // |e_pre - e_raw| / e_raw
};

struct PreconditionStudy {
  std::vector<PairedRow> rows;
  std::optional<double> max_relative_gap;
  std::vector<CellMoments> moments;
};

// Every cell twice: raw A and U^t A with the same seeds and the numeric c0 of
// the raw system. The rows of U^t A are heavier (|a~_1|^2 = sigma_1^2), so the
// preconditioned run skips the step bound check; divergence is still caught.
PreconditionStudy run_precondition_study(const ExperimentSpec& spec);
CsvTable paired_table(const PreconditionStudy& s);
void write_precondition_study(const std::string& out_dir, const ExperimentSpec& spec, const PreconditionStudy& s);

}  // namespace stochreg
