#include <benchmark/benchmark.h>

#include "betalink/diagnostics.hpp"
#include "betalink/estimator.hpp"
#include "betalink/model.hpp"
#include "betalink/simulate.hpp"

using namespace betalink;

namespace {

McScenario scenario(Index n) {
  const LinkFamily asym(LinkKind::AoAsymmetric);
  return McScenario::build("bench", asym, asym, Vector{{1.0, 3.0, -4.0}}, Vector{{-1.5, 0.5, -0.5}}, 1.0, 1.0, n, 1,
                           7);
}

void BM_LogLikelihood(benchmark::State& state) {
  const McScenario sc = scenario(state.range(0));
  const ModelSpec spec = sc.spec();
  const ParamVector theta = sc.truth();
  const ResponseVector y = simulate_dataset(sc, 0);
  for (auto _ : state) benchmark::DoNotOptimize(log_likelihood(spec, theta, y));
  state.SetComplexityN(state.range(0));
}

void BM_Score(benchmark::State& state) {
  const McScenario sc = scenario(state.range(0));
  const ModelSpec spec = sc.spec();
  const ParamVector theta = sc.truth();
  const ResponseVector y = simulate_dataset(sc, 0);
  for (auto _ : state) benchmark::DoNotOptimize(score(spec, theta, y));
  state.SetComplexityN(state.range(0));
}

void BM_Fisher(benchmark::State& state) {
  const McScenario sc = scenario(state.range(0));
  const ModelSpec spec = sc.spec();
  const ParamVector theta = sc.truth();
  for (auto _ : state) benchmark::DoNotOptimize(fisher_information(spec, theta));
  state.SetComplexityN(state.range(0));
}

void BM_Fit(benchmark::State& state) {
  const McScenario sc = scenario(state.range(0));
  const ModelSpec spec = sc.spec();
  const ResponseVector y = simulate_dataset(sc, 0);
  for (auto _ : state) benchmark::DoNotOptimize(fit(spec, y).loglik);
}

void BM_Envelope(benchmark::State& state) {
  const McScenario sc = scenario(100);
  const ModelSpec spec = sc.spec();
  const ResponseVector y = simulate_dataset(sc, 0);
  const FittedModel f = fit(spec, y);
  EnvelopeOptions o;
  o.k = static_cast<int>(state.range(0));
  o.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(simulated_envelope(spec, y, f, o).outside_fraction);
}

}  // namespace

BENCHMARK(BM_LogLikelihood)->RangeMultiplier(10)->Range(100, 10000)->Complexity(benchmark::oN);
BENCHMARK(BM_Score)->RangeMultiplier(10)->Range(100, 10000)->Complexity(benchmark::oN);
BENCHMARK(BM_Fisher)->RangeMultiplier(10)->Range(100, 10000)->Complexity(benchmark::oN);
BENCHMARK(BM_Fit)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Envelope)->Arg(19)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
