#pragma once

// Data-parallel kernels. Every OpenMP kernel has a serial reference with the
// same signature; tests hold them against each other and bench_kernels times
// both. Reductions are accumulated in fixed-size row chunks merged in chunk
// order by both versions, so results do not depend on the thread count.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rmiat/gateway.hpp"
#include "rmiat/mixedfx.hpp"

namespace rmiat::kernels {

inline constexpr size_t kChunkRows = 4096;

// `group` holds dense indices in [0, n_groups).
GroupSums group_sums_serial(std::span<const double> y, std::span<const uint8_t> x, std::span<const int> group,
                            size_t n_groups);
GroupSums group_sums_parallel(std::span<const double> y, std::span<const uint8_t> x, std::span<const int> group,
                              size_t n_groups);

std::vector<double> objective_grid_serial(const GroupSums& sums, std::span<const double> log_lambdas,
                                          Criterion criterion);
std::vector<double> objective_grid_parallel(const GroupSums& sums, std::span<const double> log_lambdas,
                                            Criterion criterion);

using ProfileLookup = std::function<const SimProfile&(const TrialKey&)>;

std::vector<CompletionResult> simulate_batch_serial(std::span<const RenderedPrompt> prompts,
                                                    const ProfileLookup& profile, uint64_t seed);
std::vector<CompletionResult> simulate_batch_parallel(std::span<const RenderedPrompt> prompts,
                                                      const ProfileLookup& profile, uint64_t seed);

}  // namespace rmiat::kernels
