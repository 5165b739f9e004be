#include <doctest.h>

#include <algorithm>
#include <random>

#include "rmiat/analysis.hpp"
#include "rmiat/catalog.hpp"
#include "rmiat/runner.hpp"
#include "rmiat/util.hpp"
#include "support.hpp"

using namespace rmiat;
using rmiat::testing::TempDir;

namespace {

std::vector<TrialRecord> simulate_store(const std::vector<IatSpec>& specs, uint64_t seed) {
  TempDir dir;
  TrialStore store(dir.path());
  std::map<std::string, SimProfile> profiles;
  for (const auto& s : specs) profiles[s.id] = default_sim_profile(s.id);
  SimulatorSource sim(profiles, seed);
  RunOptions opts;
  opts.parallelism = 4;
  run(build_plan(specs), specs, sim, store, "a", opts);
  return store.load("a");
}

RunInfo sim_info(uint64_t seed) {
  RunInfo info;
  info.run_id = "a";
  info.backend = "simulator";
  info.seed = seed;
  return info;
}

const IatAnalysis& find(const AnalysisResult& r, std::string_view id) {
  for (const auto& a : r.iats) {
    if (a.iat_id == id) return a;
  }
  throw std::out_of_range(std::string(id));
}

}  // namespace

TEST_CASE("full simulated study") {
  const auto& specs = builtin_catalog();
  const auto recs = simulate_store(specs, 7);
  const AnalysisResult r = analyze(recs, specs, sim_info(7));
  REQUIRE(r.iats.size() == 10);
  CHECK(r.ok());
  size_t inclusive_rows = 0;
  for (const auto& a : r.iats) {
    CAPTURE(a.iat_id);
    REQUIRE(a.excluded);
    REQUIRE(a.excluded->fit);
    REQUIRE(a.excluded->effect);
    CHECK(a.records == 2 * 20 * find_builtin(a.iat_id)->group_word_count());
    CHECK(a.excluded->n + a.refusals == a.records);
    if (a.iat_id == "mental-physical-temporary-permanent") {
      CHECK(std::abs(a.excluded->effect->d) < 0.15);
    } else {
      CHECK(a.excluded->fit->beta_condition > 0);
    }
    if (a.inclusive) {
      ++inclusive_rows;
      CHECK(a.refusals > 0);
      CHECK(a.inclusive->n == a.records);
      CHECK(a.inclusive->effect->d > a.excluded->effect->d);
    }
  }
  CHECK(inclusive_rows == 3);
  REQUIRE(r.overhead);
  CHECK(r.overhead->per_iat.size() == 10);
}

TEST_CASE("refusal modes") {
  const std::vector<IatSpec> specs = {*find_builtin("european-african-americans-pleasant-unpleasant-2"),
                                      *find_builtin("men-women-career-family")};
  const auto recs = simulate_store(specs, 3);
  const AnalysisResult both = analyze(recs, specs, sim_info(3), RefusalMode::Both);
  CHECK(find(both, "men-women-career-family").inclusive.has_value());
  const auto& race = find(both, specs[0].id);
  REQUIRE(race.inclusive);
  CHECK(race.inclusive->effect->d >= race.excluded->effect->d);

  const AnalysisResult ex = analyze(recs, specs, sim_info(3), RefusalMode::Excluded);
  CHECK_FALSE(find(ex, specs[0].id).inclusive.has_value());
  const AnalysisResult inc = analyze(recs, specs, sim_info(3), RefusalMode::Inclusive);
  CHECK_FALSE(find(inc, specs[0].id).excluded.has_value());
  CHECK(find(inc, specs[0].id).inclusive->n == 1440);

  CHECK(parse_refusal_mode("both") == RefusalMode::Both);
  CHECK(parse_refusal_mode("auto") == RefusalMode::Auto);
  CHECK_THROWS(parse_refusal_mode("sometimes"));
}

TEST_CASE("a store with one IAT gives one fit") {
  const std::vector<IatSpec> specs = {*find_builtin("young-old-pleasant-unpleasant")};
  const AnalysisResult r = analyze(simulate_store(specs, 1), builtin_catalog(), sim_info(1));
  REQUIRE(r.iats.size() == 1);
  CHECK(r.iats[0].excluded->fit.has_value());
}

TEST_CASE("a degenerate IAT is reported and the others still fit") {
  const std::vector<IatSpec> specs = {*find_builtin("men-women-math-arts"), *find_builtin("men-women-science-arts")};
  auto recs = simulate_store(specs, 2);
  std::erase_if(recs, [&](const TrialRecord& t) {
    return t.key.iat_id == specs[0].id && t.key.condition == Condition::Incompatible;
  });
  const AnalysisResult r = analyze(recs, specs, sim_info(2));
  CHECK_FALSE(r.ok());
  CHECK(find(r, specs[0].id).has_errors());
  CHECK_FALSE(find(r, specs[0].id).excluded->error.empty());
  CHECK(find(r, specs[1].id).excluded->fit.has_value());
}

TEST_CASE("record order does not change the analysis") {
  const std::vector<IatSpec> specs = {*find_builtin("european-african-americans-pleasant-unpleasant-3")};
  auto recs = simulate_store(specs, 5);
  const Json a = analysis_to_json(analyze(recs, specs, sim_info(5)));
  std::shuffle(recs.begin(), recs.end(), std::mt19937_64(1));
  const Json b = analysis_to_json(analyze(recs, specs, sim_info(5)));
  CHECK(a == b);
}

TEST_CASE("fits.json round-trips") {
  const std::vector<IatSpec> specs = {*find_builtin("european-african-americans-pleasant-unpleasant-1"),
                                      *find_builtin("flowers-insects-pleasant-unpleasant")};
  const AnalysisResult r = analyze(simulate_store(specs, 9), specs, sim_info(9));
  const Json doc = analysis_to_json(r);
  CHECK(doc["run"]["backend"] == "simulator");
  CHECK(doc["run"]["seed"] == 9);
  CHECK(doc["include_refusals"] == "auto");
  CHECK(doc["criterion"] == "REML");
  const Json& fit = doc["iats"][0]["excluded"]["fit"];
  CHECK(fit.contains("beta_condition"));
  CHECK(fit.contains("se_condition"));
  CHECK(fit.contains("sigma2_u"));
  CHECK(fit.contains("loglik"));
  CHECK(doc["iats"][0]["excluded"]["effect"].contains("ci_low"));
  const double beta = fit["beta_condition"].get<double>();
  CHECK(beta == round_sig6(beta));

  const AnalysisResult back = analysis_from_json(doc);
  CHECK(analysis_to_json(back) == doc);
  CHECK(back.iats.size() == 2);
  CHECK(back.refusals.total_refusals == r.refusals.total_refusals);
}

TEST_CASE("run info from metadata") {
  const Json meta = Json::parse(R"({"run_id":"r1","backend":"simulator","seed":7,"plan_digest":"abc",)"
                                R"("created_at":"2026-01-01T00:00:00Z","specs":[],"match_mode":"normalized"})");
  const RunInfo info = run_info_from_meta(meta);
  CHECK(info.run_id == "r1");
  CHECK(info.seed == 7u);
  CHECK(info.plan_digest == "abc");
  CHECK_FALSE(info.config.contains("created_at"));
  CHECK_FALSE(info.config.contains("specs"));
  CHECK(info.config["match_mode"] == "normalized");
}
