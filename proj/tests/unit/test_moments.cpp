#include "stochreg/moments.hpp"

#include "stochreg/errors.hpp"
#include "stochreg/exact.hpp"
#include "stochreg/verify.hpp"
#include "support/gen.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace stochreg;

namespace {

SolverConfig config(Method m, double c0, std::size_t M, double epochs, std::uint64_t seed) {
  SolverConfig c;
  c.method = m;
  c.c0 = c0;
  c.M = M;
  c.max_epochs = epochs;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(McMoments, LandweberHasNoVariance) {
  const auto p = gen_shaw(16);
  const auto d = add_noise(p, 1e-2, 3);
  const auto r = mc_moments(p, d.y_delta, config(Method::landweber, 1.0 / GramOperator(p.A).norm(), 1, 20.0, 1), 5);
  ASSERT_FALSE(r.rows.empty());
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.variance, 0.0);
    EXPECT_EQ(row.mse_standard_error, 0.0);
    EXPECT_EQ(row.run_count, 5u);
  }
  EXPECT_EQ(r.kstar_standard_error, 0.0);
}

TEST(McMoments, ExactDataAtSolution) {
  auto p = gen_gravity(16);
  p.x0 = p.x_dag;
  const auto r = mc_moments(p, p.y_dag, config(Method::svrg, safe_step(p), 4, 3.0, 2), 20);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.bias_sq, 0.0);
    EXPECT_EQ(row.variance, 0.0);
    EXPECT_EQ(row.mse, 0.0);
  }
}

TEST(McMoments, BiasVarianceIdentity) {
  gen::for_all(8, 71, [](gen::Gen& g) {
    const int n = g.integer(2, 12), m = g.integer(1, 6);
    const auto p = g.instance(n, m);
    const Vector y = p.y_dag + g.vector(n, 0.3);
    const Method me = g.coin() ? Method::sgd : Method::svrg;
    const auto r = mc_moments(p, y, config(me, safe_step(p), 3, 4.0, g.u64()), static_cast<std::size_t>(g.integer(2, 70)));
    for (const auto& row : r.rows) {
      EXPECT_NEAR(row.mse, row.bias_sq + row.variance, 1e-10 * std::max(row.mse, 1e-300));
      EXPECT_GE(row.variance, 0.0);
    }
  });
}

TEST(McMoments, MatchesEnumeration) {
  const auto ri = random_instance(3, 3, 72, false);
  const double c0 = safe_step(ri.inst);
  for (Method me : {Method::sgd, Method::svrg}) {
    const auto acc = epoch_accounting(me, 3, 2);
    const double epoch = acc.epoch(4);
    const auto em = enumerate_exact_moments(ri.inst, ri.y, c0, 2, 2, me);
    const auto r = mc_moments(ri.inst, ri.y, config(me, c0, 2, epoch, 5), 200000, {epoch});
    const MomentRow& row = r.rows.back();
    ASSERT_EQ(row.iteration, 4u);
    const double se = std::sqrt(em.variance_trace / static_cast<double>(row.run_count));
    EXPECT_LE((row.mean_iterate - em.mean).cwiseAbs().maxCoeff(), 4.0 * se) << to_string(me);
    EXPECT_NEAR(row.variance, em.variance_trace, 0.05 * em.variance_trace);
  }
}

TEST(McMoments, IndependentOfThreadCount) {
  const auto p = gen_phillips(40);
  const auto d = add_noise(p, 5e-2, 7);
  const auto cfg = config(Method::svrg, safe_step(p, 1.0), 6, 10.0, 11);
  McOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = mc_moments(p, d.y_delta, cfg, 37, {}, one);
  const auto b = mc_moments(p, d.y_delta, cfg, 37, {}, four);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].mse, b.rows[i].mse);
    EXPECT_EQ(a.rows[i].variance, b.rows[i].variance);
    EXPECT_EQ(a.rows[i].mean_iterate, b.rows[i].mean_iterate);
  }
  EXPECT_EQ(a.kstar_mean, b.kstar_mean);
  EXPECT_EQ(a.e_kstar_mean, b.e_kstar_mean);
}

TEST(McMoments, PerRunStopAveraged) {
  const auto p = gen_shaw(20);
  const auto d = add_noise(p, 5e-2, 8);
  const auto cfg = config(Method::sgd, safe_step(p, 1.0), 1, 50.0, 12);
  const auto r = mc_moments(p, d.y_delta, cfg, 6);
  double k = 0.0, e = 0.0;
  for (std::uint64_t run = 0; run < 6; ++run) {
    SolverConfig c = cfg;
    c.stream = run;
    const auto t = sgd_run(p, d.y_delta, c);
    k += t.k_star;
    e += t.e_at_k_star;
  }
  EXPECT_NEAR(r.kstar_mean, k / 6.0, 1e-12 * k);
  EXPECT_NEAR(r.e_kstar_mean, e / 6.0, 1e-12 * e);
  double best = r.rows.front().mse;
  for (const auto& row : r.rows) best = std::min(best, row.mse);
  EXPECT_EQ(r.curve_e, best);
}

TEST(McMoments, ResampledNoiseChangesData) {
  const auto p = gen_shaw(16);
  const auto d = add_noise(p, 5e-2, 1);
  auto cfg = config(Method::sgd, safe_step(p), 1, 5.0, 3);
  McOptions opt;
  opt.resample_noise = true;
  opt.epsilon = 5e-2;
  opt.noise_seed = 99;
  const auto fixed = mc_moments(p, d.y_delta, cfg, 8);
  const auto fresh = mc_moments(p, d.y_delta, cfg, 8, {}, opt);
  EXPECT_NE(fixed.rows.back().mse, fresh.rows.back().mse);
  const auto again = mc_moments(p, d.y_delta, cfg, 8, {}, opt);
  EXPECT_EQ(fresh.rows.back().mse, again.rows.back().mse);
}

TEST(McMoments, DivergentRunsAreCounted) {
  const auto p = gen_shaw(16);
  const auto d = add_noise(p, 1e-2, 1);
  auto cfg = config(Method::sgd, 4.0 / p.A.max_row_norm_sq(), 1, 300.0, 3);
  cfg.allow_inadmissible_step = true;
  const auto r = mc_moments(p, d.y_delta, cfg, 20);
  EXPECT_EQ(r.divergent_runs, 20u);
  EXPECT_EQ(r.runs_used, 0u);
  EXPECT_EQ(r.divergence_messages.size(), 8u);
  EXPECT_TRUE(r.rows.empty());
}

TEST(McMoments, Preconditions) {
  const auto p = gen_shaw(8);
  EXPECT_THROW(mc_moments(p, p.y_dag, config(Method::sgd, safe_step(p), 1, 1.0, 1), 1), InputError);
  EXPECT_THROW(mc_moments(p, Vector::Zero(3), config(Method::sgd, safe_step(p), 1, 1.0, 1), 4), InputError);
  EXPECT_THROW(mc_moments(p, p.y_dag, config(Method::sgd, safe_step(p), 1, 1.0, 1), 4, {-1.0}), InputError);
}
