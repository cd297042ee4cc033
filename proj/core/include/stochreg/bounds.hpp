#pragma once

#include "stochreg/problems.hpp"

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

namespace stochreg {

struct ConditionReport {
  std::size_t n = 0;
  std::size_t M = 0;
  double c0 = 0.0;
  double norm_B = 0.0;
  double nu = 0.0;
  double c_star = 2.0;

  double c_B = 0.0;        // (1 - c0|B|)^-M
  double c_BM = 0.0;       // sum_{i=1}^{M-1} (1 - (1 - c0|B|)^i)^2
  double c_B_prime = 0.0;  // (1 - c0|B|)^{-2(M-1)}
  double c_nu = 0.0;       // nu^nu (M c0)^-nu
  double c_dstar = 0.0;    // (3 + 2 (M c0 |B|)^2) n M c_B c0^2 |B|

  // (4 + 2 (M c0 |B|)^2) n M^-2 c_B c_BM <= 1 - 1/c_star
  double cond_rate_lhs = 0.0;
  double cond_rate_rhs = 0.0;
  bool cond_rate = false;

  // (M-1)^2 c0^2 |B|^2 <= (2 c'_B)^-1 and (M+1)^2 <= (2 c'_B)^-1 (n-1)
  std::array<double, 2> cond_compare_lhs{};
  std::array<double, 2> cond_compare_rhs{};
  std::array<bool, 2> cond_compare{};

  // Reformulation inputs: c = c0 |B| M (rate condition) and c = c0 |B| (M-1)
  // (comparison condition).
  double scaled_rate_c = 0.0;
  double scaled_compare_c = 0.0;

  bool compare_holds() const noexcept { return cond_compare[0] && cond_compare[1]; }
};

// nu^nu (M c0)^-nu with 0^0 = 1.
double c_nu(double nu, std::size_t M, double c0);

ConditionReport condition_report(std::size_t n, double norm_B, double c0, std::size_t M, double nu,
                                 double c_star = 2.0);
ConditionReport condition_report(const ProblemInstance& inst, double c0, std::size_t M, double nu,
                                 double c_star = 2.0);

// (2 + 2^{2nu} |B| c_** c_*) c_nu^2 K^{-2nu} |w|^2 + (2 M c0 + c_** c_*) K delta_bar^2
double theorem_bound(const ConditionReport& report, double norm_w, double delta_bar, double K, double nu,
                     std::size_t M, double c0, double norm_B, std::size_t n);
double theorem_bound(const ConditionReport& report, double norm_w, double delta_bar, double K);

// 2^{2nu+2} c_{nu+1/2}^2 n c_* K^{-2nu-1} |w|^2 + 2 n c_* delta_bar^2
double residual_bound(const ConditionReport& report, double norm_w, double delta_bar, double K, double nu,
                      std::size_t n);
double residual_bound(const ConditionReport& report, double norm_w, double delta_bar, double K);

// Least-squares slope of log(mse) against log(delta).
double rate_fit(const std::vector<std::pair<double, double>>& pairs);

}  // namespace stochreg
