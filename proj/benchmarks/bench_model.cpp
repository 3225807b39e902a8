#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "granular/distributions.hpp"
#include "granular/model.hpp"
#include "granular/rng.hpp"

using namespace granular;

namespace {

ModelParams wb_params() {
  ModelParams p;
  p.mu = 1.6;
  p.alpha = 1.2;
  p.k_mode = CountMode::Pareto;
  return p;
}

}  // namespace

static void BM_SampleHhi(benchmark::State& state) {
  ModelParams p;
  p.mu = 1.5;
  const auto K = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_hhi(p, K, 1000, 1, 1));
  state.SetItemsProcessed(state.iterations() * 1000 * state.range(0));
}
BENCHMARK(BM_SampleHhi)->RangeMultiplier(16)->Range(64, 16384)->Unit(benchmark::kMillisecond);

static void BM_SummarizePopulation(benchmark::State& state) {
  const auto p = wb_params();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(summarize_population(p, n, 1, true, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SummarizePopulation)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

static void BM_SimulatePanel(benchmark::State& state) {
  const auto p = wb_params();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_panel(p, n, 44, 1, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 44);
}
BENCHMARK(BM_SimulatePanel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_LevyStablePdf(benchmark::State& state) {
  const double alpha = state.range(0) / 10.0;
  double x = -20.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(levy_stable_pdf(x, alpha, 1.0));
    x = x > 20.0 ? -20.0 : x + 0.37;
  }
}
BENCHMARK(BM_LevyStablePdf)->Arg(12)->Arg(15)->Arg(18);

static void BM_PhiloxUniform(benchmark::State& state) {
  RandomStream s(1, StreamTag::Generic);
  for (auto _ : state) benchmark::DoNotOptimize(s.uniform());
}
BENCHMARK(BM_PhiloxUniform);
