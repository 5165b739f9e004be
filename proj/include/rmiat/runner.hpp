#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rmiat/catalog.hpp"
#include "rmiat/gateway.hpp"
#include "rmiat/prompts.hpp"
#include "rmiat/records.hpp"
#include "rmiat/refusal.hpp"

namespace rmiat {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Append-only trial log (trials.jsonl) plus per-run metadata (run_meta.json)
// in one directory. Appends are serialized and flushed before returning.
class TrialStore {
 public:
  explicit TrialStore(std::filesystem::path dir);
  ~TrialStore();
  TrialStore(const TrialStore&) = delete;
  TrialStore& operator=(const TrialStore&) = delete;

  void append(const TrialRecord& record);
  void sync();

  // Last write wins per (run_id, trial); records keep first-appearance order.
  // A torn final line (crash mid-append) is ignored.
  std::vector<TrialRecord> load(const std::optional<std::string>& run_id = std::nullopt) const;

  // Rewrites trials.jsonl with exactly one record per (run_id, trial).
  void compact();

  std::optional<Json> run_meta(const std::string& run_id) const;
  std::vector<std::string> run_ids() const;
  void put_run_meta(const std::string& run_id, const Json& meta);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path trials_path() const { return dir_ / "trials.jsonl"; }
  std::filesystem::path meta_path() const { return dir_ / "run_meta.json"; }

 private:
  void open_for_append();

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::FILE* out_ = nullptr;
  size_t unsynced_ = 0;
};

struct ConditionCounts {
  size_t completed = 0;  // valid answers
  size_t refused = 0;
  size_t failed = 0;
  size_t total() const { return completed + refused + failed; }
};

struct RunSummary {
  std::string run_id;
  Backend backend = Backend::Simulator;
  // Trials executed by this invocation, per (iat_id, condition).
  std::map<std::pair<std::string, Condition>, ConditionCounts> counts;
  size_t executed = 0;
  size_t skipped = 0;  // already persisted before this invocation
  double wall_seconds = 0.0;

  ConditionCounts totals() const;
};

struct RunOptions {
  size_t parallelism = 1;
  // Stop after this many executions; leaves a partial run that resume() completes.
  std::optional<size_t> limit;
  MatchMode match_mode = MatchMode::Normalized;
};

// Starts a new run. Throws StoreError if run_id already has records.
// `meta` is merged into run_meta.json together with the plan digest and specs.
RunSummary run(const std::vector<PlanEntry>& plan, const std::vector<IatSpec>& specs, CompletionSource& source,
               TrialStore& store, const std::string& run_id, const RunOptions& options, Json meta = Json::object());

// Executes only the planned trials that have no record under run_id.
RunSummary resume(const std::vector<PlanEntry>& plan, const std::vector<IatSpec>& specs, CompletionSource& source,
                  TrialStore& store, const std::string& run_id, const RunOptions& options,
                  Json meta = Json::object());

// Specs recorded for a run in run_meta.json.
std::vector<IatSpec> specs_from_meta(const Json& meta);

}  // namespace rmiat
