#pragma once

#include "stochreg/linalg.hpp"
#include "stochreg/problems.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace stochreg {

// Gaussian n x m instance with x0 = 0 and y = y_dag + noise_scale * N(0, I),
// all drawn from Philox streams of `seed`. When preconditioned, A is replaced
// by Sigma V^t and y by U^t y.
struct RandomInstance {
  ProblemInstance inst;
  Vector y;
};
RandomInstance random_instance(std::size_t n, std::size_t m, std::uint64_t seed, bool preconditioned,
                               double noise_scale = 0.3);

// fraction / max(max_i |a_i|^2, |B|^2)
double safe_step(const ProblemInstance& inst, double fraction = 0.5);

struct CheckResult {
  std::string name;
  bool pass = false;
  bool hard = true;  // soft checks are reported but do not fail the suite
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyReport {
  std::string level;
  std::vector<CheckResult> checks;
  double seconds = 0.0;
  bool all_pass() const;
  std::vector<std::string> failed() const;
  nlohmann::json to_json() const;
};

enum class Fault { none, svrg_sign };

// level: "fast" or "full".
VerifyReport run_verification(const std::string& level, Fault fault = Fault::none);

}  // namespace stochreg
