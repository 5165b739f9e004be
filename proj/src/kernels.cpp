#include "rmiat/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

namespace rmiat::kernels {

namespace {

struct FirstPass {
  std::vector<int64_t> n, c;
  std::vector<double> sy;
  explicit FirstPass(size_t g) : n(g, 0), c(g, 0), sy(g, 0.0) {}
};

struct SecondPass {
  std::vector<double> wyy, wxy;
  explicit SecondPass(size_t g) : wyy(g, 0.0), wxy(g, 0.0) {}
};

void first_pass(std::span<const double> y, std::span<const uint8_t> x, std::span<const int> group, size_t begin,
                size_t end, FirstPass& acc) {
  for (size_t i = begin; i < end; ++i) {
    const auto g = static_cast<size_t>(group[i]);
    ++acc.n[g];
    acc.c[g] += x[i];
    acc.sy[g] += y[i];
  }
}

void second_pass(std::span<const double> y, std::span<const uint8_t> x, std::span<const int> group, size_t begin,
                 size_t end, const std::vector<double>& ybar, const std::vector<double>& xbar, SecondPass& acc) {
  for (size_t i = begin; i < end; ++i) {
    const auto g = static_cast<size_t>(group[i]);
    const double dy = y[i] - ybar[g];
    acc.wyy[g] += dy * dy;
    acc.wxy[g] += (static_cast<double>(x[i]) - xbar[g]) * dy;
  }
}

GroupSums assemble(const FirstPass& a, const SecondPass& b) {
  GroupSums s;
  s.n = a.n;
  s.c = a.c;
  s.sum_y = a.sy;
  s.wyy = b.wyy;
  s.wxy = b.wxy;
  return s;
}

void means(const FirstPass& a, std::vector<double>& ybar, std::vector<double>& xbar) {
  const size_t g = a.n.size();
  ybar.assign(g, 0.0);
  xbar.assign(g, 0.0);
  for (size_t k = 0; k < g; ++k) {
    if (a.n[k] > 0) {
      ybar[k] = a.sy[k] / static_cast<double>(a.n[k]);
      xbar[k] = static_cast<double>(a.c[k]) / static_cast<double>(a.n[k]);
    }
  }
}

// Both entry points reduce per-chunk partials in chunk order, so the result
// depends only on the data and kChunkRows, never on the thread count.
GroupSums chunked_group_sums(std::span<const double> y, std::span<const uint8_t> x, std::span<const int> group,
                             size_t n_groups, bool parallel) {
  const size_t rows = y.size();
  const size_t chunks = std::max<size_t>(1, (rows + kChunkRows - 1) / kChunkRows);
  const auto count = static_cast<long long>(chunks);

  std::vector<FirstPass> first(chunks, FirstPass(n_groups));
#pragma omp parallel for schedule(static) if (parallel)
  for (long long k = 0; k < count; ++k) {
    const size_t begin = static_cast<size_t>(k) * kChunkRows;
    first_pass(y, x, group, begin, std::min(rows, begin + kChunkRows), first[static_cast<size_t>(k)]);
  }
  FirstPass a(n_groups);
  for (const auto& part : first) {
    for (size_t g = 0; g < n_groups; ++g) {
      a.n[g] += part.n[g];
      a.c[g] += part.c[g];
      a.sy[g] += part.sy[g];
    }
  }
  std::vector<double> ybar, xbar;
  means(a, ybar, xbar);

  std::vector<SecondPass> second(chunks, SecondPass(n_groups));
#pragma omp parallel for schedule(static) if (parallel)
  for (long long k = 0; k < count; ++k) {
    const size_t begin = static_cast<size_t>(k) * kChunkRows;
    second_pass(y, x, group, begin, std::min(rows, begin + kChunkRows), ybar, xbar, second[static_cast<size_t>(k)]);
  }
  SecondPass b(n_groups);
  for (const auto& part : second) {
    for (size_t g = 0; g < n_groups; ++g) {
      b.wyy[g] += part.wyy[g];
      b.wxy[g] += part.wxy[g];
    }
  }
  return assemble(a, b);
}

}  // namespace

GroupSums group_sums_serial(std::span<const double> y, std::span<const uint8_t> x, std::span<const int> group,
                            size_t n_groups) {
  return chunked_group_sums(y, x, group, n_groups, false);
}

GroupSums group_sums_parallel(std::span<const double> y, std::span<const uint8_t> x, std::span<const int> group,
                              size_t n_groups) {
  return chunked_group_sums(y, x, group, n_groups, true);
}

std::vector<double> objective_grid_serial(const GroupSums& sums, std::span<const double> log_lambdas,
                                          Criterion criterion) {
  std::vector<double> out(log_lambdas.size());
  for (size_t i = 0; i < log_lambdas.size(); ++i) {
    out[i] = profiled_objective(sums, std::exp(log_lambdas[i]), criterion);
  }
  return out;
}

std::vector<double> objective_grid_parallel(const GroupSums& sums, std::span<const double> log_lambdas,
                                            Criterion criterion) {
  std::vector<double> out(log_lambdas.size());
  const auto n = static_cast<long long>(log_lambdas.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    out[static_cast<size_t>(i)] = profiled_objective(sums, std::exp(log_lambdas[static_cast<size_t>(i)]), criterion);
  }
  return out;
}

std::vector<CompletionResult> simulate_batch_serial(std::span<const RenderedPrompt> prompts,
                                                    const ProfileLookup& profile, uint64_t seed) {
  std::vector<CompletionResult> out(prompts.size());
  for (size_t i = 0; i < prompts.size(); ++i) {
    out[i] = simulate(prompts[i].key, prompts[i], profile(prompts[i].key), seed);
  }
  return out;
}

std::vector<CompletionResult> simulate_batch_parallel(std::span<const RenderedPrompt> prompts,
                                                      const ProfileLookup& profile, uint64_t seed) {
  std::vector<CompletionResult> out(prompts.size());
  const auto n = static_cast<long long>(prompts.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (long long i = 0; i < n; ++i) {
    const auto& p = prompts[static_cast<size_t>(i)];
    out[static_cast<size_t>(i)] = simulate(p.key, p, profile(p.key), seed);
  }
  return out;
}

}  // namespace rmiat::kernels
