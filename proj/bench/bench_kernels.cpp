// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "rmiat/catalog.hpp"
#include "rmiat/kernels.hpp"
#include "rmiat/prompts.hpp"

namespace {

using namespace rmiat;

struct Rows {
  std::vector<double> y;
  std::vector<uint8_t> x;
  std::vector<int> g;
};

Rows make_rows(size_t n, size_t groups) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> noise(0.0, 60.0);
  Rows r;
  r.y.resize(n);
  r.x.resize(n);
  r.g.resize(n);
  for (size_t i = 0; i < n; ++i) {
    r.x[i] = static_cast<uint8_t>(i % 2);
    r.g[i] = static_cast<int>((i / 2) % groups);
    r.y[i] = 400.0 + 80.0 * r.x[i] + noise(rng);
  }
  return r;
}

template <auto Kernel>
void BM_group_sums(benchmark::State& state) {
  const Rows r = make_rows(static_cast<size_t>(state.range(0)), 20);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(r.y, r.x, r.g, 20));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_TEMPLATE(BM_group_sums, kernels::group_sums_serial)->Arg(1 << 14)->Arg(1 << 20);
BENCHMARK_TEMPLATE(BM_group_sums, kernels::group_sums_parallel)->Arg(1 << 14)->Arg(1 << 20);

template <auto Kernel>
void BM_objective_grid(benchmark::State& state) {
  const Rows r = make_rows(3000, 20);
  const GroupSums sums = kernels::group_sums_serial(r.y, r.x, r.g, 20);
  std::vector<double> grid(static_cast<size_t>(state.range(0)));
  for (size_t i = 0; i < grid.size(); ++i) grid[i] = kLogLambdaMin + (kLogLambdaMax - kLogLambdaMin) * i / (grid.size() - 1);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(sums, grid, Criterion::REML));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_TEMPLATE(BM_objective_grid, kernels::objective_grid_serial)->Arg(1000)->Arg(100000);
BENCHMARK_TEMPLATE(BM_objective_grid, kernels::objective_grid_parallel)->Arg(1000)->Arg(100000);

template <auto Kernel>
void BM_simulate_batch(benchmark::State& state) {
  const IatSpec& spec = builtin_catalog().front();
  std::vector<RenderedPrompt> prompts;
  for (const auto& k : enumerate_trials(spec)) prompts.push_back(render(spec, k));
  const SimProfile profile = default_sim_profile(spec.id);
  const kernels::ProfileLookup lookup = [&](const TrialKey&) -> const SimProfile& { return profile; };
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(prompts, lookup, 7));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(prompts.size()));
}
BENCHMARK_TEMPLATE(BM_simulate_batch, kernels::simulate_batch_serial);
BENCHMARK_TEMPLATE(BM_simulate_batch, kernels::simulate_batch_parallel);

}  // namespace

BENCHMARK_MAIN();
