#include "stochreg/bounds.hpp"

#include "stochreg/errors.hpp"
#include "stochreg/spectral.hpp"

#include <cmath>
#include <string>

namespace stochreg {

double c_nu(double nu, std::size_t M, double c0) {
  if (nu == 0.0) return 1.0;
  return std::pow(nu, nu) * std::pow(static_cast<double>(M) * c0, -nu);
}

ConditionReport condition_report(std::size_t n, double norm_B, double c0, std::size_t M, double nu, double c_star) {
  if (n < 1 || M < 1) throw InputError("condition_report: n and M must be positive");
  if (!(c0 > 0.0)) throw InputError("condition_report: c0 must be positive");
  if (!(norm_B >= 0.0)) throw InputError("condition_report: |B| must be nonnegative");
  if (!(c_star > 1.0)) throw InputError("condition_report: c_star must exceed 1");
  if (!(nu >= 0.0)) throw InputError("condition_report: nu must be nonnegative");
  const double a = c0 * norm_B;
  if (!(a < 1.0))
    throw DomainError("condition_report: c0 |B| = " + std::to_string(a) + " >= 1, constants undefined");
  ConditionReport r;
  r.n = n;
  r.M = M;
  r.c0 = c0;
  r.norm_B = norm_B;
  r.nu = nu;
  r.c_star = c_star;
  const double Md = static_cast<double>(M);
  const double nd = static_cast<double>(n);
  const double q = 1.0 - a;
  r.c_B = std::pow(q, -Md);
  for (std::size_t i = 1; i < M; ++i) {
    const double t = -std::expm1(static_cast<double>(i) * std::log1p(-a));
    r.c_BM += t * t;
  }
  r.c_B_prime = std::pow(q, -2.0 * (Md - 1.0));
  r.c_nu = c_nu(nu, M, c0);
  const double mcb = Md * a;
  r.c_dstar = (3.0 + 2.0 * mcb * mcb) * nd * Md * r.c_B * c0 * c0 * norm_B;
  r.cond_rate_lhs = (4.0 + 2.0 * mcb * mcb) * nd / (Md * Md) * r.c_B * r.c_BM;
  r.cond_rate_rhs = 1.0 - 1.0 / c_star;
  r.cond_rate = r.cond_rate_lhs <= r.cond_rate_rhs;
  const double inv2 = 1.0 / (2.0 * r.c_B_prime);
  r.cond_compare_lhs = {(Md - 1.0) * (Md - 1.0) * a * a, (Md + 1.0) * (Md + 1.0)};
  r.cond_compare_rhs = {inv2, inv2 * (nd - 1.0)};
  r.cond_compare = {r.cond_compare_lhs[0] <= r.cond_compare_rhs[0], r.cond_compare_lhs[1] <= r.cond_compare_rhs[1]};
  r.scaled_rate_c = a * Md;
  r.scaled_compare_c = a * (Md - 1.0);
  return r;
}

ConditionReport condition_report(const ProblemInstance& inst, double c0, std::size_t M, double nu, double c_star) {
  return condition_report(inst.n(), GramOperator(inst.A).norm(), c0, M, nu, c_star);
}

double theorem_bound(const ConditionReport& r, double norm_w, double delta_bar, double K, double nu, std::size_t M,
                     double c0, double norm_B, std::size_t n) {
  (void)n;
  if (!(K > 0.0)) throw InputError("theorem_bound: K must be positive");
  const double cn = c_nu(nu, M, c0);
  const double cc = r.c_dstar * r.c_star;
  const double bias = (2.0 + std::pow(2.0, 2.0 * nu) * norm_B * cc) * cn * cn * std::pow(K, -2.0 * nu) * norm_w * norm_w;
  const double noise = (2.0 * static_cast<double>(M) * c0 + cc) * K * delta_bar * delta_bar;
  return bias + noise;
}

double theorem_bound(const ConditionReport& r, double norm_w, double delta_bar, double K) {
  return theorem_bound(r, norm_w, delta_bar, K, r.nu, r.M, r.c0, r.norm_B, r.n);
}

double residual_bound(const ConditionReport& r, double norm_w, double delta_bar, double K, double nu, std::size_t n) {
  if (!(K > 0.0)) throw InputError("residual_bound: K must be positive");
  const double ch = c_nu(nu + 0.5, r.M, r.c0);
  const double nd = static_cast<double>(n);
  return std::pow(2.0, 2.0 * nu + 2.0) * ch * ch * nd * r.c_star * std::pow(K, -2.0 * nu - 1.0) * norm_w * norm_w +
         2.0 * nd * r.c_star * delta_bar * delta_bar;
}

double residual_bound(const ConditionReport& r, double norm_w, double delta_bar, double K) {
  return residual_bound(r, norm_w, delta_bar, K, r.nu, r.n);
}

double rate_fit(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) throw InputError("rate_fit: need at least 3 (delta, mse) pairs");
  double sx = 0.0, sy = 0.0;
  for (const auto& [d, e] : pairs) {
    if (!(d > 0.0) || !(e > 0.0) || !std::isfinite(d) || !std::isfinite(e))
      throw InputError("rate_fit: delta and mse must be positive and finite");
    sx += std::log(d);
    sy += std::log(e);
  }
  const double k = static_cast<double>(pairs.size());
  const double mx = sx / k, my = sy / k;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [d, e] : pairs) {
    const double dx = std::log(d) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(e) - my);
  }
  if (!(sxx > 0.0)) throw InputError("rate_fit: all delta values are equal");
  return sxy / sxx;
}

}  // namespace stochreg
