#include <doctest.h>

#include <atomic>
#include <fstream>
#include <set>

#include "rmiat/catalog.hpp"
#include "rmiat/refusal.hpp"
#include "rmiat/runner.hpp"
#include "rmiat/util.hpp"
#include "support.hpp"

using namespace rmiat;
using rmiat::testing::TempDir;

namespace {

std::map<std::string, SimProfile> default_profiles(const std::vector<IatSpec>& specs) {
  std::map<std::string, SimProfile> m;
  for (const auto& s : specs) m[s.id] = default_sim_profile(s.id);
  return m;
}

// Wraps a source and counts calls.
class Counting : public CompletionSource {
 public:
  explicit Counting(CompletionSource& inner) : inner_(inner) {}
  CompletionResult complete(const RenderedPrompt& p) override {
    ++calls;
    return inner_.complete(p);
  }
  Backend backend() const override { return inner_.backend(); }
  std::atomic<size_t> calls{0};

 private:
  CompletionSource& inner_;
};

// Fails every trial whose word matches, with the given exception type.
template <class E>
class FailOn : public CompletionSource {
 public:
  FailOn(CompletionSource& inner, std::string word) : inner_(inner), word_(std::move(word)) {}
  CompletionResult complete(const RenderedPrompt& p) override {
    if (p.key.word == word_) throw E("scripted failure for " + word_);
    return inner_.complete(p);
  }
  Backend backend() const override { return inner_.backend(); }

 private:
  CompletionSource& inner_;
  std::string word_;
};

std::map<std::string, TrialRecord> by_identity(const std::vector<TrialRecord>& recs) {
  std::map<std::string, TrialRecord> m;
  for (const auto& r : recs) m.emplace(trial_identity(r.key), r);
  return m;
}

bool same_values(const std::vector<TrialRecord>& a, const std::vector<TrialRecord>& b) {
  const auto ma = by_identity(a), mb = by_identity(b);
  if (ma.size() != mb.size()) return false;
  for (const auto& [k, r] : ma) {
    auto it = mb.find(k);
    if (it == mb.end() || !same_trial_values(r, it->second)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("full builtin plan against the simulator") {
  TempDir dir;
  const auto& specs = builtin_catalog();
  const auto plan = build_plan(specs);
  SimulatorSource sim(default_profiles(specs), 7);
  TrialStore store(dir.path());
  RunOptions opts;
  opts.parallelism = 4;
  const RunSummary s = run(plan, specs, sim, store, "full", opts);
  const auto t = s.totals();
  CHECK(t.completed + t.refused == 12920);
  CHECK(t.failed == 0);
  CHECK(s.executed == 12920);
  CHECK(s.backend == Backend::Simulator);

  const auto recs = store.load("full");
  CHECK(recs.size() == 12920);
  std::set<std::string> ids;
  for (const auto& r : recs) ids.insert(trial_identity(r.key));
  CHECK(ids.size() == 12920);

  // Refusals only in the race IATs, mostly under the incompatible instruction.
  const RefusalSummary rs = refusal_summary(recs);
  CHECK(rs.total_refusals == t.refused);
  CHECK(rs.refusals_for("flowers-insects-pleasant-unpleasant") == 0);
  REQUIRE(rs.incompatible_share.has_value());
  CHECK(*rs.incompatible_share > 0.80);
  CHECK(*rs.incompatible_share < 0.90);

  const Json meta = *store.run_meta("full");
  CHECK(meta["backend"] == "simulator");
  CHECK(meta["planned_trials"] == 12920);
  CHECK(meta["plan_digest"] == plan_digest(plan));
  CHECK(specs_from_meta(meta) == specs);
}

TEST_CASE("single-trial plan") {
  TempDir dir;
  const IatSpec& s = *find_builtin("men-women-career-family");
  std::vector<PlanEntry> plan = build_plan({s});
  plan.resize(1);
  SimulatorSource sim(default_profiles({s}), 1);
  TrialStore store(dir.path());
  const RunSummary sum = run(plan, {s}, sim, store, "one", {});
  CHECK(sum.totals().total() == 1);
  CHECK(sum.counts.size() == 1);
}

TEST_CASE("resume executes exactly the missing trials") {
  TempDir dir;
  const IatSpec& s = *find_builtin("mental-physical-temporary-permanent");
  const auto plan = build_plan({s});
  REQUIRE(plan.size() == 480);
  SimulatorSource sim(default_profiles({s}), 3);
  Counting counting(sim);
  TrialStore store(dir.path());

  RunOptions opts;
  opts.parallelism = 3;
  opts.limit = 100;
  const RunSummary first = run(plan, {s}, counting, store, "r", opts);
  CHECK(first.executed == 100);
  CHECK(counting.calls == 100);
  CHECK(store.load("r").size() == 100);

  opts.limit.reset();
  const RunSummary second = resume(plan, {s}, counting, store, "r", opts);
  CHECK(second.executed == 380);
  CHECK(second.skipped == 100);
  CHECK(counting.calls == 480);
  const auto after_first_resume = store.load("r");

  const RunSummary third = resume(plan, {s}, counting, store, "r", opts);
  CHECK(third.executed == 0);
  CHECK(counting.calls == 480);
  CHECK(same_values(store.load("r"), after_first_resume));

  // An uninterrupted run produces the same values.
  TempDir other;
  TrialStore clean(other.path());
  run(plan, {s}, sim, clean, "r", {});
  CHECK(same_values(clean.load("r"), after_first_resume));
}

TEST_CASE("values do not depend on parallelism") {
  const std::vector<IatSpec> specs = {*find_builtin("european-african-americans-pleasant-unpleasant-3")};
  const auto plan = build_plan(specs);
  SimulatorSource sim(default_profiles(specs), 21);
  std::vector<std::vector<TrialRecord>> results;
  for (size_t p : {1u, 2u, 8u}) {
    TempDir dir;
    TrialStore store(dir.path());
    RunOptions opts;
    opts.parallelism = p;
    run(plan, specs, sim, store, "p", opts);
    results.push_back(store.load("p"));
  }
  CHECK(same_values(results[0], results[1]));
  CHECK(same_values(results[0], results[2]));
}

TEST_CASE("an existing run id is not overwritten") {
  TempDir dir;
  const IatSpec& s = *find_builtin("men-women-career-family");
  const auto plan = build_plan({s});
  SimulatorSource sim(default_profiles({s}), 1);
  TrialStore store(dir.path());
  run(plan, {s}, sim, store, "x", {});
  CHECK_THROWS_AS(run(plan, {s}, sim, store, "x", {}), StoreError);
  // A different plan cannot be resumed into the same run.
  const auto other = build_plan({*find_builtin("men-women-math-arts")});
  CHECK_THROWS_AS(resume(other, {*find_builtin("men-women-math-arts")}, sim, store, "x", {}), StoreError);
}

TEST_CASE("template drift is detected before any call") {
  TempDir dir;
  const IatSpec& s = *find_builtin("men-women-career-family");
  auto plan = build_plan({s});
  plan[5].prompt_sha256 = sha256_hex("stale template");
  SimulatorSource sim(default_profiles({s}), 1);
  Counting counting(sim);
  TrialStore store(dir.path());
  CHECK_THROWS(run(plan, {s}, counting, store, "d", {}));
  CHECK(counting.calls == 0);
}

TEST_CASE("per-trial failures are recorded, auth failures abort") {
  const IatSpec& s = *find_builtin("men-women-career-family");
  const auto plan = build_plan({s});
  SimulatorSource sim(default_profiles({s}), 1);

  SUBCASE("gateway errors mark trials failed") {
    TempDir dir;
    TrialStore store(dir.path());
    FailOn<RetriesExhaustedError> flaky(sim, "Steve");
    RunOptions opts;
    opts.parallelism = 2;
    const RunSummary sum = run(plan, {s}, flaky, store, "f", opts);
    CHECK(sum.totals().failed == 40);
    CHECK(sum.totals().total() == 640);
    size_t failed = 0;
    for (const auto& r : store.load("f")) {
      if (r.classified.outcome == Outcome::Failed) {
        ++failed;
        CHECK_FALSE(r.result.has_value());
        CHECK(r.error.find("Steve") != std::string::npos);
      }
    }
    CHECK(failed == 40);
    // Failed trials are retried by resume only if they are missing; they are
    // recorded, so a resume executes nothing.
    CHECK(resume(plan, {s}, sim, store, "f", opts).executed == 0);
  }
  SUBCASE("malformed usage keeps the raw body for diagnosis") {
    TempDir dir;
    TrialStore store(dir.path());
    class Malformed : public CompletionSource {
     public:
      CompletionResult complete(const RenderedPrompt&) override {
        throw MalformedUsageError("usage.completion_tokens_details.reasoning_tokens missing", R"({"usage":{}})");
      }
      Backend backend() const override { return Backend::Remote; }
    } bad;
    std::vector<PlanEntry> one(plan.begin(), plan.begin() + 1);
    run(one, {s}, bad, store, "m", {});
    const auto recs = store.load("m");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].classified.outcome == Outcome::Failed);
    CHECK(recs[0].error.find(R"({"usage":{}})") != std::string::npos);
  }
  SUBCASE("auth errors stop the run") {
    TempDir dir;
    TrialStore store(dir.path());
    FailOn<AuthError> denied(sim, "John");
    CHECK_THROWS_AS(run(plan, {s}, denied, store, "a", {}), AuthError);
  }
}

TEST_CASE("store: torn lines, last write wins, compaction") {
  TempDir dir;
  const IatSpec& s = *find_builtin("men-women-career-family");
  const auto plan = build_plan({s});
  SimulatorSource sim(default_profiles({s}), 1);
  {
    TrialStore store(dir.path());
    RunOptions opts;
    opts.limit = 10;
    run(plan, {s}, sim, store, "t", opts);

    auto recs = store.load("t");
    TrialRecord changed = recs[3];
    changed.classified = {Outcome::Refusal, "", ""};
    store.append(changed);
    store.sync();
  }
  {
    std::ofstream out(dir / "trials.jsonl", std::ios::app);
    out << R"({"key": {"iat_id": "men-women-care)";  // crash mid-append
  }
  TrialStore store(dir.path());
  auto recs = store.load("t");
  REQUIRE(recs.size() == 10);
  CHECK(recs[3].classified.outcome == Outcome::Refusal);
  CHECK(trial_identity(recs[3].key) == trial_identity(plan[3].key));

  store.compact();
  CHECK(split(read_file((dir / "trials.jsonl").string()), '\n').size() >= 10);
  size_t lines = 0;
  for (const auto& l : split(read_file((dir / "trials.jsonl").string()), '\n')) lines += !trim(l).empty();
  CHECK(lines == 10);
  CHECK(same_values(store.load("t"), recs));

  // The run can still be completed after the crash.
  CHECK(resume(plan, {s}, sim, store, "t", {}).executed == 630);
  CHECK(store.load("t").size() == 640);
}

TEST_CASE("resume after a crash without compaction") {
  TempDir dir;
  const IatSpec& s = *find_builtin("men-women-career-family");
  const auto plan = build_plan({s});
  SimulatorSource sim(default_profiles({s}), 4);
  {
    TrialStore store(dir.path());
    RunOptions opts;
    opts.limit = 50;
    run(plan, {s}, sim, store, "c", opts);
  }
  {
    std::ofstream out(dir / "trials.jsonl", std::ios::app);
    out << R"({"key": {"iat_id")";
  }
  TrialStore store(dir.path());
  CHECK(resume(plan, {s}, sim, store, "c", {}).executed == 590);
  TrialStore reopened(dir.path());
  CHECK(reopened.load("c").size() == 640);
}

TEST_CASE("runs are isolated by id") {
  TempDir dir;
  const IatSpec& s = *find_builtin("men-women-career-family");
  const auto plan = build_plan({s});
  TrialStore store(dir.path());
  SimulatorSource a(default_profiles({s}), 1), b(default_profiles({s}), 2);
  run(plan, {s}, a, store, "a", {});
  run(plan, {s}, b, store, "b", {});
  CHECK(store.run_ids() == std::vector<std::string>{"a", "b"});
  CHECK(store.load("a").size() == 640);
  CHECK(store.load().size() == 1280);
  CHECK_FALSE(same_values(store.load("a"), store.load("b")));
}
