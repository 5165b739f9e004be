#include "rmiat/runner.hpp"

#include <omp.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <exception>
#include <unordered_map>
#include <unordered_set>

#include "rmiat/util.hpp"

namespace rmiat {

namespace fs = std::filesystem;

namespace {

constexpr size_t kSyncEvery = 256;

std::string store_key(const std::string& run_id, const TrialKey& key) {
  return run_id + '\x1e' + trial_identity(key);
}

}  // namespace

TrialStore::TrialStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw StoreError("cannot create store directory " + dir_.string() + ": " + ec.message());
}

TrialStore::~TrialStore() {
  if (out_) {
    std::fflush(out_);
    ::fsync(fileno(out_));
    std::fclose(out_);
  }
}

void TrialStore::open_for_append() {
  if (out_) return;
  // Drop a torn tail left by a crash mid-append so new records start on a
  // fresh line.
  std::error_code ec;
  if (fs::exists(trials_path(), ec)) {
    const std::string text = read_file(trials_path().string());
    if (!text.empty() && text.back() != '\n') {
      const auto keep = text.rfind('\n');
      fs::resize_file(trials_path(), keep == std::string::npos ? 0 : keep + 1, ec);
      if (ec) throw StoreError("cannot truncate torn record in " + trials_path().string() + ": " + ec.message());
    }
  }
  out_ = std::fopen(trials_path().c_str(), "ab");
  if (!out_) throw StoreError("cannot open " + trials_path().string() + " for append");
}

void TrialStore::append(const TrialRecord& record) {
  const std::string line = record_to_json(record).dump() + "\n";
  std::lock_guard lock(mu_);
  open_for_append();
  if (std::fwrite(line.data(), 1, line.size(), out_) != line.size() || std::fflush(out_) != 0) {
    throw StoreError("write to " + trials_path().string() + " failed");
  }
  if (++unsynced_ >= kSyncEvery) {
    ::fsync(fileno(out_));
    unsynced_ = 0;
  }
}

void TrialStore::sync() {
  std::lock_guard lock(mu_);
  if (out_) {
    std::fflush(out_);
    ::fsync(fileno(out_));
    unsynced_ = 0;
  }
}

std::vector<TrialRecord> TrialStore::load(const std::optional<std::string>& run_id) const {
  std::lock_guard lock(mu_);
  if (out_) std::fflush(out_);
  std::vector<TrialRecord> records;
  if (!fs::exists(trials_path())) return records;
  const std::string text = read_file(trials_path().string());
  const auto lines = split(text, '\n');
  std::unordered_map<std::string, size_t> index;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    TrialRecord rec;
    try {
      rec = record_from_json(Json::parse(lines[i]));
    } catch (const std::exception& e) {
      const bool last = i + 1 == lines.size() || (i + 2 == lines.size() && trim(lines[i + 1]).empty());
      if (last) break;
      throw StoreError(trials_path().string() + " line " + std::to_string(i + 1) + ": " + e.what());
    }
    if (run_id && rec.run_id != *run_id) continue;
    const std::string k = store_key(rec.run_id, rec.key);
    auto [it, inserted] = index.emplace(k, records.size());
    if (inserted) records.push_back(std::move(rec));
    else records[it->second] = std::move(rec);
  }
  return records;
}

void TrialStore::compact() {
  auto records = load();
  std::string text;
  for (const auto& r : records) text += record_to_json(r).dump() + "\n";
  std::lock_guard lock(mu_);
  if (out_) {
    std::fclose(out_);
    out_ = nullptr;
  }
  write_file_atomic(trials_path().string(), text);
}

std::optional<Json> TrialStore::run_meta(const std::string& run_id) const {
  if (!fs::exists(meta_path())) return std::nullopt;
  Json doc = Json::parse(read_file(meta_path().string()));
  if (!doc.contains("runs") || !doc["runs"].contains(run_id)) return std::nullopt;
  return doc["runs"][run_id];
}

std::vector<std::string> TrialStore::run_ids() const {
  std::vector<std::string> ids;
  if (!fs::exists(meta_path())) return ids;
  Json doc = Json::parse(read_file(meta_path().string()));
  if (doc.contains("runs")) {
    for (const auto& [id, _] : doc["runs"].items()) ids.push_back(id);
  }
  return ids;
}

void TrialStore::put_run_meta(const std::string& run_id, const Json& meta) {
  std::lock_guard lock(mu_);
  Json doc = fs::exists(meta_path()) ? Json::parse(read_file(meta_path().string())) : Json{{"runs", Json::object()}};
  doc["runs"][run_id] = meta;
  write_file_atomic(meta_path().string(), doc.dump(2) + "\n");
}

ConditionCounts RunSummary::totals() const {
  ConditionCounts t;
  for (const auto& [_, c] : counts) {
    t.completed += c.completed;
    t.refused += c.refused;
    t.failed += c.failed;
  }
  return t;
}

std::vector<IatSpec> specs_from_meta(const Json& meta) {
  std::vector<IatSpec> specs;
  if (meta.contains("specs")) {
    for (const auto& s : meta["specs"]) specs.push_back(spec_from_json(s));
  }
  return specs;
}

namespace {

RunSummary execute(const std::vector<PlanEntry>& plan, const std::vector<IatSpec>& specs, CompletionSource& source,
                   TrialStore& store, const std::string& run_id, const RunOptions& options, Json meta,
                   bool fresh) {
  if (plan.empty()) throw std::invalid_argument("plan is empty");
  if (options.parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");

  std::unordered_map<std::string, const IatSpec*> by_id;
  for (const auto& s : specs) by_id[s.id] = &s;

  // Render everything up front so template drift is caught before any call.
  std::vector<RenderedPrompt> prompts;
  prompts.reserve(plan.size());
  for (const auto& entry : plan) {
    auto it = by_id.find(entry.key.iat_id);
    if (it == by_id.end()) throw std::invalid_argument("plan references unknown IAT " + entry.key.iat_id);
    RenderedPrompt p = render(*it->second, entry.key);
    if (sha256_hex(p.text) != entry.prompt_sha256) {
      throw std::runtime_error("prompt hash mismatch for " + trial_identity(entry.key) +
                               ": plan was generated from different templates");
    }
    prompts.push_back(std::move(p));
  }

  const std::string digest = plan_digest(plan);
  const auto existing_meta = store.run_meta(run_id);
  const auto existing = store.load(run_id);
  if (fresh && !existing.empty()) {
    throw StoreError("run " + run_id + " already has " + std::to_string(existing.size()) +
                     " records; use resume");
  }
  if (existing_meta && existing_meta->value("plan_digest", "") != digest) {
    throw StoreError("run " + run_id + " was started from a different plan");
  }
  if (!existing_meta) {
    meta["run_id"] = run_id;
    meta["backend"] = to_string(source.backend());
    meta["plan_digest"] = digest;
    meta["planned_trials"] = plan.size();
    meta["match_mode"] = to_string(options.match_mode);
    Json spec_docs = Json::array();
    for (const auto& s : specs) spec_docs.push_back(spec_to_json(s));
    meta["specs"] = spec_docs;
    meta["created_at"] = utc_timestamp();
    store.put_run_meta(run_id, meta);
  }

  std::unordered_set<std::string> done;
  for (const auto& r : existing) done.insert(trial_identity(r.key));
  std::vector<size_t> pending;
  for (size_t i = 0; i < plan.size(); ++i) {
    if (!done.count(trial_identity(plan[i].key))) pending.push_back(i);
  }

  RunSummary summary;
  summary.run_id = run_id;
  summary.backend = source.backend();
  summary.skipped = plan.size() - pending.size();

  const auto started = std::chrono::steady_clock::now();
  std::atomic<size_t> claimed{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex summary_mu;
  const size_t limit = options.limit.value_or(pending.size());
  const auto n_pending = static_cast<long long>(pending.size());

#pragma omp parallel for num_threads(static_cast<int>(options.parallelism)) schedule(dynamic, 1)
  for (long long j = 0; j < n_pending; ++j) {
    if (abort.load()) continue;
    if (claimed.fetch_add(1) >= limit) continue;
    const size_t i = pending[static_cast<size_t>(j)];
    const RenderedPrompt& prompt = prompts[i];
    const IatSpec& spec = *by_id.at(prompt.key.iat_id);
    try {
      TrialRecord rec;
      rec.key = prompt.key;
      rec.prompt_sha256 = plan[i].prompt_sha256;
      rec.run_id = run_id;
      try {
        CompletionResult result = source.complete(prompt);
        rec.classified = classify_output(result.output_text, spec.attribute_1.label, spec.attribute_2.label,
                                         options.match_mode);
        rec.result = std::move(result);
      } catch (const AuthError&) {
        throw;
      } catch (const MalformedUsageError& e) {
        rec.classified = {Outcome::Failed, "", ""};
        rec.error = std::string(e.what()) + "; body: " + e.raw_body();
      } catch (const GatewayError& e) {
        rec.classified = {Outcome::Failed, "", ""};
        rec.error = e.what();
      }
      rec.recorded_at = utc_timestamp();
      store.append(rec);

      std::lock_guard lock(summary_mu);
      auto& c = summary.counts[{rec.key.iat_id, rec.key.condition}];
      switch (rec.classified.outcome) {
        case Outcome::Valid:
          ++c.completed;
          break;
        case Outcome::Refusal:
          ++c.refused;
          break;
        case Outcome::Failed:
          ++c.failed;
          break;
      }
      ++summary.executed;
    } catch (...) {
      std::lock_guard lock(summary_mu);
      if (!fatal) fatal = std::current_exception();
      abort.store(true);
    }
  }
  store.sync();
  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (fatal) std::rethrow_exception(fatal);
  return summary;
}

}  // namespace

RunSummary run(const std::vector<PlanEntry>& plan, const std::vector<IatSpec>& specs, CompletionSource& source,
               TrialStore& store, const std::string& run_id, const RunOptions& options, Json meta) {
  return execute(plan, specs, source, store, run_id, options, std::move(meta), true);
}

RunSummary resume(const std::vector<PlanEntry>& plan, const std::vector<IatSpec>& specs, CompletionSource& source,
                  TrialStore& store, const std::string& run_id, const RunOptions& options, Json meta) {
  return execute(plan, specs, source, store, run_id, options, std::move(meta), false);
}

}  // namespace rmiat
