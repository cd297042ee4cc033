#pragma once

#include "stochreg/bounds.hpp"
#include "stochreg/moments.hpp"
#include "stochreg/problems.hpp"
#include "stochreg/solvers.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace stochreg {

inline constexpr int kSchemaVersion = 1;

// Shortest text that parses back to the same double ("nan", "inf", "-inf" for
// non-finite values).
std::string format_double(double v);
double parse_double(const std::string& s);

// Write to a temporary file in the target directory, then rename over the target.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Minimal RFC 4180 CSV: fields with ',', '"' or newlines are quoted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  bool operator==(const CsvTable&) const = default;
};
std::string write_csv(const CsvTable& t);
CsvTable parse_csv(const std::string& text);

nlohmann::json to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

struct InstanceFile {
  ProblemInstance inst;
  std::optional<NoisyData> data;
};
nlohmann::json instance_to_json(const ProblemInstance& inst, const NoisyData* data = nullptr);
InstanceFile instance_from_json(const nlohmann::json& j);
void save_instance(const std::string& path, const ProblemInstance& inst, const NoisyData* data = nullptr);
InstanceFile load_instance(const std::string& path);

nlohmann::json to_json(const SolverConfig& cfg);

// Columns: epoch, iteration, error_sq, residual_sq.
CsvTable trajectory_table(const Trajectory& t);
std::vector<Checkpoint> trajectory_from_table(const CsvTable& t);
nlohmann::json trajectory_sidecar(const Trajectory& t, const SolverConfig& cfg, const ProblemInstance& inst,
                                  const std::string& instance_path);

// Columns: epoch, iteration, bias_sq, variance, mse, residual_mse,
// mse_standard_error, residual_standard_error, run_count.
CsvTable moment_table(const MomentReport& r);
std::vector<MomentRow> moment_rows_from_table(const CsvTable& t);
nlohmann::json to_json(const MomentReport& r, bool include_means = false);
nlohmann::json to_json(const ConditionReport& r);

}  // namespace stochreg
