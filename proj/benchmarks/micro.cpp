// ============================================================================
//  bnsl microbenchmarks
//
//  Hot paths only: curve evaluation (both routes), the M4 numeric forward
//  map, the fitting loss, and a small end-to-end grid search.  Run with
//  --benchmark_min_time=... as usual; nothing here touches the filesystem.
// ============================================================================

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "bnsl/fitting.hpp"
#include "bnsl/forms.hpp"
#include "bnsl/metrics.hpp"
#include "bnsl/simulate.hpp"

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i)
    xs[i] = std::exp(std::log(lo) +
                     (std::log(hi) - std::log(lo)) * i / double(n - 1));
  return xs;
}

const bnsl::BnslParams kPlain{0.01, 2.0, 0.35, {}};
const bnsl::BnslParams kTwoBreak{
    0.01, 2.0, 0.35, {{0.8, 50.0, 0.2}, {-0.5, 900.0, 0.3}}};
const bnsl::BnslParams kSharp{0.0, 1.0, 0.3, {{2.5, 415.0, 0.001}}};
const bnsl::M4Params kM4{1.0, 1.0, -2.0, 0.75, 0.25};

void BM_EvalBnslPlain(benchmark::State& state) {
  double x = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bnsl::eval_bnsl(kPlain, x));
    x = x < 1e4 ? x * 1.37 : 1.0;
  }
}
BENCHMARK(BM_EvalBnslPlain);

void BM_EvalBnslTwoBreaks(benchmark::State& state) {
  double x = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bnsl::eval_bnsl(kTwoBreak, x));
    x = x < 1e4 ? x * 1.37 : 1.0;
  }
}
BENCHMARK(BM_EvalBnslTwoBreaks);

// sharp enough that every call beyond the break takes the log route
void BM_EvalBnslLogRoute(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(bnsl::eval_bnsl(kSharp, 2.0e3));
}
BENCHMARK(BM_EvalBnslLogRoute);

void BM_EvalM4Cold(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(bnsl::detail::eval_m4_raw(kM4, 0.577));
}
BENCHMARK(BM_EvalM4Cold);

// warm-started ascending sweep, the pattern the fitting loop produces
void BM_EvalM4ForwardSweep(benchmark::State& state) {
  const auto xs = log_grid(0.05, 20.0, 64);
  for (auto _ : state) {
    bnsl::detail::M4Forward forward(kM4);
    double acc = 0.0;
    for (double x : xs) acc += forward(x);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_EvalM4ForwardSweep);

void BM_StableMsle(benchmark::State& state) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.1, 10.0);
  std::vector<bnsl::PredictionPair> pairs(256);
  for (auto& p : pairs) p = {unit(rng), unit(rng)};
  for (auto _ : state) benchmark::DoNotOptimize(bnsl::stable_msle(pairs));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_StableMsle);

void BM_GridSearchOneBreak(benchmark::State& state) {
  const auto pts =
      bnsl::generate_noiseless({0.0, 2.0, 0.3, {{0.8, 300.0, 0.25}}},
                               log_grid(8.0, 8192.0, 30));
  bnsl::FitConfig cfg;
  for (auto _ : state)
    benchmark::DoNotOptimize(bnsl::grid_search(pts, bnsl::FormKind::bnsl, 1, cfg));
}
BENCHMARK(BM_GridSearchOneBreak)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
