#include "stochreg/linalg.hpp"
#include "stochreg/moments.hpp"
#include "stochreg/problems.hpp"
#include "stochreg/solvers.hpp"
#include "stochreg/spectral.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace stochreg;

namespace {

struct Setup {
  ProblemInstance inst;
  Vector y;
  double c = 0.0;
  double norm_B = 0.0;
};

// phillips with 1% noise, cached per size
const Setup& setup(std::size_t n) {
  static std::map<std::size_t, Setup> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    Setup s;
    s.inst = generate_problem("s-phillips", n);
    s.y = add_noise(s.inst, 1e-2, 1).y_delta;
    s.c = step_constant(s.inst.A);
    s.norm_B = GramOperator(s.inst.A).norm();
    it = cache.emplace(n, std::move(s)).first;
  }
  return it->second;
}

// |B| is passed in so the admissibility check does not time an eigensolve
SolverConfig config(const Setup& s, Method m, double c0, std::size_t M, double epochs) {
  SolverConfig cfg;
  cfg.gram_norm = s.norm_B;
  cfg.method = m;
  cfg.c0 = c0;
  cfg.M = M;
  cfg.max_epochs = epochs;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

static void BM_Dot(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  Vector a = Vector::LinSpaced(len, 0.0, 1.0), b = Vector::LinSpaced(len, 1.0, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(kernel::dot(a.data(), b.data(), len));
  state.SetBytesProcessed(state.iterations() * 2 * len * sizeof(double));
}
BENCHMARK(BM_Dot)->Arg(200)->Arg(1000);

// cost of 10 epochs; items are row operations
static void BM_SgdEpochs(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Setup& s = setup(n);
  const SolverConfig cfg = config(s, Method::sgd, 4 * s.c / n, 1, 10);
  for (auto _ : state) benchmark::DoNotOptimize(solve(s.inst, s.y, cfg).e_at_k_star);
  state.SetItemsProcessed(state.iterations() * 10 * n);
}
BENCHMARK(BM_SgdEpochs)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_SvrgEpochs(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Setup& s = setup(n);
  const std::size_t M = n / 10;
  const SolverConfig cfg = config(s, Method::svrg, 5 * s.c / M, M, 10);
  for (auto _ : state) benchmark::DoNotOptimize(solve(s.inst, s.y, cfg).e_at_k_star);
  state.SetItemsProcessed(state.iterations() * 10 * n);
}
BENCHMARK(BM_SvrgEpochs)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_LandweberEpochs(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Setup& s = setup(n);
  const SolverConfig cfg = config(s, Method::landweber, 1.0 / s.norm_B, 1, 10);
  for (auto _ : state) benchmark::DoNotOptimize(solve(s.inst, s.y, cfg).e_at_k_star);
  state.SetItemsProcessed(state.iterations() * 10 * n);
}
BENCHMARK(BM_LandweberEpochs)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

// 32 runs of 20 SVRG epochs, one block per thread
static void BM_McMoments(benchmark::State& state) {
  const Setup& s = setup(200);
  const SolverConfig cfg = config(s, Method::svrg, 5 * s.c / 20, 20, 20);
  McOptions opt;
  opt.threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mc_moments(s.inst, s.y, cfg, 32, {}, opt).e_kstar_mean);
}
BENCHMARK(BM_McMoments)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
