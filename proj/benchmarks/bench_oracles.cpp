#include "stochreg/exact.hpp"
#include "stochreg/problems.hpp"
#include "stochreg/spectral.hpp"
#include "stochreg/verify.hpp"

#include <benchmark/benchmark.h>

using namespace stochreg;

static void BM_GeneratePhillips(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(generate_problem("s-phillips", n).x_dag.sum());
}
BENCHMARK(BM_GeneratePhillips)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_GramOperator(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ProblemInstance p = generate_problem("s-shaw", n);
  for (auto _ : state) benchmark::DoNotOptimize(GramOperator(p.A).norm());
}
BENCHMARK(BM_GramOperator)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

static void BM_Precondition(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ProblemInstance p = generate_problem("s-shaw", n);
  for (auto _ : state) benchmark::DoNotOptimize(precondition(p, p.y_dag).y.sum());
}
BENCHMARK(BM_Precondition)->Arg(200)->Unit(benchmark::kMillisecond);

// n^{KM} leaves: 3^{2K}
static void BM_EnumerateSvrg(benchmark::State& state) {
  const auto K = static_cast<std::size_t>(state.range(0));
  const auto ri = random_instance(3, 3, 5, true);
  const double c0 = safe_step(ri.inst);
  for (auto _ : state)
    benchmark::DoNotOptimize(enumerate_exact_moments(ri.inst, ri.y, c0, 2, K, Method::svrg).variance_trace);
}
BENCHMARK(BM_EnumerateSvrg)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

static void BM_PropagateMoments(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto ri = random_instance(n, 4, 5, true);
  const double c0 = safe_step(ri.inst, 0.25);
  for (auto _ : state)
    benchmark::DoNotOptimize(propagate_error_moments(ri.inst, ri.y, c0, 2, 3, Method::sgd).second.trace());
}
BENCHMARK(BM_PropagateMoments)->Arg(20)->Arg(80)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
