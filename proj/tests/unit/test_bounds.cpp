#include "stochreg/bounds.hpp"

#include "stochreg/errors.hpp"
#include "support/gen.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace stochreg;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(ConditionReport, SingleInnerStep) {
  const auto r = condition_report(50, 0.8, 0.5, 1, 1.0, 2.0);
  EXPECT_EQ(r.c_BM, 0.0);
  EXPECT_EQ(r.cond_rate_lhs, 0.0);
  EXPECT_TRUE(r.cond_rate);
  EXPECT_DOUBLE_EQ(r.c_B_prime, 1.0);
}

// Reference values computed with 50-digit arithmetic (mpmath) for n = 100,
// M = 10, c0 |B| = 0.01, c_* = 2.
TEST(ConditionReport, HighPrecisionReference) {
  const auto r = condition_report(100, 1.0, 0.01, 10, 1.0, 2.0);
  EXPECT_LE(rel(r.c_B, 1.1057273553218805608749872472509619100), 1e-14);
  EXPECT_LE(rel(r.c_BM, 0.026820147628693434703584897269538201), 1e-13);
  EXPECT_LE(rel(r.c_B_prime, 1.1983025879194086133886293812368844533), 1e-14);
  EXPECT_LE(rel(r.cond_rate_lhs, 0.11921619904540674324497843659302570807), 1e-13);
  EXPECT_LE(rel(r.cond_compare_rhs[0], 0.41725688072504380720803931259270410), 1e-14);
  EXPECT_LE(rel(r.cond_compare_rhs[1], 41.308431191779336913595891946683646), 1e-14);
  EXPECT_LE(rel(r.c_dstar, 0.33392966130720792938424614866979049682), 1e-14);
  EXPECT_DOUBLE_EQ(r.c_nu, 10.0);
  EXPECT_DOUBLE_EQ(r.cond_rate_rhs, 0.5);
  // booleans from the same script
  EXPECT_TRUE(r.cond_rate);
  EXPECT_TRUE(r.cond_compare[0]);
  EXPECT_FALSE(r.cond_compare[1]);
  EXPECT_FALSE(r.compare_holds());
  EXPECT_NEAR(r.scaled_rate_c, 0.1, 1e-15);
  EXPECT_NEAR(r.scaled_compare_c, 0.09, 1e-15);
}

TEST(ConditionReport, DirectFormulas) {
  gen::for_all(30, 61, [](gen::Gen& g) {
    const std::size_t n = static_cast<std::size_t>(g.integer(2, 500));
    const std::size_t M = static_cast<std::size_t>(g.integer(1, 40));
    const double nb = g.uniform(0.1, 3.0), c0 = g.uniform(0.001, 0.99) / nb, nu = g.uniform(0.0, 3.0);
    const auto r = condition_report(n, nb, c0, M, nu);
    const double q = 1.0 - c0 * nb;
    double cbm = 0.0;
    for (std::size_t i = 1; i < M; ++i) cbm += std::pow(1.0 - std::pow(q, static_cast<double>(i)), 2);
    EXPECT_LE(rel(r.c_B, std::pow(q, -static_cast<double>(M))), 1e-12);
    if (M > 1) EXPECT_LE(rel(r.c_BM, cbm), 1e-10);
    EXPECT_LE(rel(r.c_B_prime, std::pow(q, -2.0 * static_cast<double>(M - 1))), 1e-12);
    const double Md = static_cast<double>(M), nd = static_cast<double>(n);
    const double lhs = (4.0 + 2.0 * std::pow(Md * c0 * nb, 2)) * nd / (Md * Md) * r.c_B * r.c_BM;
    EXPECT_NEAR(r.cond_rate_lhs, lhs, 1e-10 * std::max(1.0, lhs));
    EXPECT_EQ(r.cond_rate, r.cond_rate_lhs <= r.cond_rate_rhs);
    EXPECT_EQ(r.compare_holds(), r.cond_compare[0] && r.cond_compare[1]);
    EXPECT_TRUE(std::isfinite(r.c_dstar) && r.c_dstar > 0.0);
    EXPECT_GT(r.c_nu, 0.0);
  });
}

TEST(ConditionReport, SmallStepSatisfiesRateCondition) {
  double prev = 1e300;
  for (double a : {0.5, 0.1, 0.01, 1e-3, 1e-4}) {
    const auto r = condition_report(100, 1.0, a, 10, 1.0);
    EXPECT_LT(r.cond_rate_lhs, prev);
    prev = r.cond_rate_lhs;
  }
  EXPECT_TRUE(condition_report(100, 1.0, 1e-4, 10, 1.0).cond_rate);
}

TEST(ConditionReport, DomainAndInputErrors) {
  EXPECT_THROW(condition_report(10, 1.0, 1.0, 2, 0.0), DomainError);
  EXPECT_THROW(condition_report(10, 2.0, 0.6, 2, 0.0), DomainError);
  EXPECT_THROW(condition_report(10, 1.0, 0.1, 2, 0.0, 1.0), InputError);
  EXPECT_THROW(condition_report(10, 1.0, -0.1, 2, 0.0), InputError);
}

TEST(CNu, Conventions) {
  EXPECT_EQ(c_nu(0.0, 7, 0.3), 1.0);
  EXPECT_DOUBLE_EQ(c_nu(1.0, 10, 0.01), 10.0);
  EXPECT_NEAR(c_nu(0.5, 4, 0.25), std::sqrt(0.5), 1e-15);
}

TEST(TheoremBound, ZeroSmoothness) {
  const auto r = condition_report(20, 1.0, 0.01, 4, 0.0);
  const double w = 1.7, d = 0.03, K = 5.0;
  const double cc = r.c_dstar * r.c_star;
  const double ref = (2.0 + cc) * w * w + (2.0 * 4 * 0.01 + cc) * K * d * d;
  EXPECT_NEAR(theorem_bound(r, w, d, K), ref, 1e-14 * ref);
}

TEST(TheoremBound, GeneralNormIncludesGramFactor) {
  const auto r = condition_report(20, 0.5, 0.02, 4, 1.0);
  const double w = 1.3, d = 0.0, K = 3.0;
  const double cn = c_nu(1.0, 4, 0.02);
  const double ref = (2.0 + 4.0 * 0.5 * r.c_dstar * r.c_star) * cn * cn / (K * K) * w * w;
  EXPECT_NEAR(theorem_bound(r, w, d, K), ref, 1e-14 * ref);
}

TEST(TheoremBound, ExactDataDecay) {
  const auto r = condition_report(20, 1.0, 0.01, 4, 1.5);
  const double b1 = theorem_bound(r, 1.0, 0.0, 2.0), b2 = theorem_bound(r, 1.0, 0.0, 4.0);
  EXPECT_NEAR(b1 / b2, std::pow(2.0, 3.0), 1e-12);
  EXPECT_THROW(theorem_bound(r, 1.0, 0.0, 0.0), InputError);
}

TEST(ResidualBound, Structure) {
  const auto r = condition_report(30, 1.0, 0.01, 5, 0.0);
  const double ch = c_nu(0.5, 5, 0.01);
  EXPECT_NEAR(residual_bound(r, 2.0, 0.0, 7.0), 4.0 * ch * ch * 30 * 2.0 / 7.0 * 4.0, 1e-12);
  EXPECT_NEAR(residual_bound(r, 2.0, 0.0, 1.0) / residual_bound(r, 2.0, 0.0, 10.0), 10.0, 1e-12);
  const double floor = 2.0 * 30 * 2.0 * 0.04 * 0.04;
  EXPECT_NEAR(residual_bound(r, 2.0, 0.04, 1e18), floor, 1e-12 * floor);
  EXPECT_GT(residual_bound(r, 2.0, 0.04, 1e3), floor);
}

TEST(RateFit, SyntheticPowerLaw) {
  std::vector<std::pair<double, double>> p;
  for (double d : {1e-3, 1e-2, 5e-2, 0.2}) p.emplace_back(d, std::pow(d, 4.0 / 3.0));
  EXPECT_NEAR(rate_fit(p), 4.0 / 3.0, 1e-10);
}

TEST(RateFit, PropertyScaleInvariant) {
  gen::for_all(20, 62, [](gen::Gen& g) {
    const double slope = g.uniform(0.2, 3.0), scale = g.uniform(0.1, 10.0);
    std::vector<std::pair<double, double>> p;
    const int k = g.integer(3, 8);
    for (int i = 0; i < k; ++i) {
      const double d = std::exp(g.uniform(-8.0, 0.0));
      p.emplace_back(d, scale * std::pow(d, slope));
    }
    if (std::abs(std::log(p[0].first) - std::log(p[1].first)) < 1e-3) return;
    EXPECT_NEAR(rate_fit(p), slope, 1e-8);
  });
}

TEST(RateFit, Errors) {
  EXPECT_THROW(rate_fit({{0.1, 0.1}}), InputError);
  EXPECT_THROW(rate_fit({{0.1, 0.1}, {0.2, 0.3}, {0.3, -1.0}}), InputError);
  EXPECT_THROW(rate_fit({{0.1, 0.1}, {0.1, 0.3}, {0.1, 0.2}}), InputError);
}
