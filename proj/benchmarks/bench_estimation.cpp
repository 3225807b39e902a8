#include <benchmark/benchmark.h>

#include <vector>

#include "granular/distributions.hpp"
#include "granular/estimation.hpp"
#include "granular/rng.hpp"
#include "granular/scaling.hpp"

using namespace granular;

namespace {

std::vector<double> mig_draws(std::size_t n) {
  const MigParams p{4.788, 4.620, 0.326};
  RandomStream s(3, StreamTag::Sampler);
  std::vector<double> x(n);
  for (auto& v : x) v = mig_sample(p, s.uniform());
  return x;
}

std::vector<double> normal_draws(std::size_t n) {
  RandomStream s(4, StreamTag::Sampler);
  std::vector<double> x(n);
  for (auto& v : x) v = s.normal();
  return x;
}

}  // namespace

static void BM_KdeGaussian(benchmark::State& state) {
  const auto x = normal_draws(static_cast<std::size_t>(state.range(0)));
  const auto grid = regular_grid(-8.0, 8.0, 2500);
  for (auto _ : state) benchmark::DoNotOptimize(kde_gaussian(x, grid));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KdeGaussian)->Arg(10000)->Arg(1000000)->Unit(benchmark::kMillisecond);

static void BM_HillEstimator(benchmark::State& state) {
  const auto x = mig_draws(1000000);
  for (auto _ : state) benchmark::DoNotOptimize(hill_estimator(x, 0.01));
}
BENCHMARK(BM_HillEstimator)->Unit(benchmark::kMillisecond);

static void BM_FitMigMle(benchmark::State& state) {
  const auto x = mig_draws(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_mig_mle(x));
}
BENCHMARK(BM_FitMigMle)->Arg(2400)->Arg(24000)->Unit(benchmark::kMillisecond);

static void BM_FitGseNls(benchmark::State& state) {
  const GseParams truth{0.483, 0.894, -0.006, 1.905, 0.377};
  DensityEstimate d;
  d.grid = regular_grid(-8.0, 8.0, 2500);
  for (double x : d.grid) d.values.push_back(gse_pdf(x, truth));
  for (auto _ : state) benchmark::DoNotOptimize(fit_gse_nls(d));
}
BENCHMARK(BM_FitGseNls)->Unit(benchmark::kMillisecond);

static void BM_LeaveOneOutRescale(benchmark::State& state) {
  const auto g = normal_draws(44);
  for (auto _ : state) benchmark::DoNotOptimize(leave_one_out_rescale(g));
}
BENCHMARK(BM_LeaveOneOutRescale);
