#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <regex>

#include "rmiat/catalog.hpp"
#include "rmiat/reporting.hpp"
#include "rmiat/runner.hpp"
#include "rmiat/util.hpp"
#include "support.hpp"

using namespace rmiat;
using rmiat::testing::TempDir;

namespace {

size_t count(const std::string& hay, const std::string& needle) {
  size_t n = 0;
  for (size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

ViewResult view(size_t n, double d, double beta, double p) {
  ViewResult v;
  v.n = n;
  v.descriptives.compatible = {63.94, 52.45, n / 2, 52.45 / std::sqrt(n / 2.0)};
  v.descriptives.incompatible = {126.27, 66.24, n - n / 2, 66.24 / std::sqrt(n - n / 2.0)};
  LmmFit f;
  f.beta_intercept = 63.94;
  f.se_intercept = 2.51;
  f.beta_condition = beta;
  f.se_condition = 2.99;
  f.sigma2_u = 12.5;
  f.sigma2_e = 3500.25;
  f.loglik = -11000.5;
  f.n = n;
  f.n_groups = 20;
  f.p_value = p;
  v.fit = f;
  v.effect = EffectSize{d, d - 0.1, d + 0.1, n / 2, n - n / 2, 60.0};
  return v;
}

AnalysisResult handmade(size_t race_refusals) {
  AnalysisResult r;
  r.run.run_id = "default";
  r.run.backend = "simulator";
  r.run.seed = 7;
  r.run.config = Json{{"backend", "simulator"}, {"seed", 7}};
  IatAnalysis flowers;
  flowers.iat_id = "flowers-insects-pleasant-unpleasant";
  flowers.display_name = "Flowers/Insects + Pleasant/Unpleasant";
  flowers.records = 2000;
  flowers.excluded = view(2000, 1.04, 62.33, 1e-9);
  IatAnalysis race;
  race.iat_id = "european-african-americans-pleasant-unpleasant-1";
  race.display_name = "European/African Americans + Pleasant/Unpleasant (1)";
  race.records = 3000;
  race.refusals = race_refusals;
  race.excluded = view(3000 - race_refusals, 0.72, 193.29, 0.0005);
  if (race_refusals > 0) race.inclusive = view(3000, 0.82, 345.64, 1e-12);
  r.iats = {flowers, race};
  if (race_refusals > 0) {
    r.refusals.cells[{race.iat_id, Condition::Incompatible}] = {race_refusals - 60, 1500};
    r.refusals.cells[{race.iat_id, Condition::Compatible}] = {60, 1500};
    r.refusals.total_refusals = race_refusals;
    r.refusals.incompatible_refusals = race_refusals - 60;
    r.refusals.incompatible_share = static_cast<double>(race_refusals - 60) / race_refusals;
  }
  r.overhead = OverheadReport{{{flowers.iat_id, 97.48}, {race.iat_id, 58.23}}, 77.5};
  return r;
}

}  // namespace

TEST_CASE("significance stars") {
  CHECK(significance_stars(0.0005) == "***");
  CHECK(significance_stars(0.005) == "**");
  CHECK(significance_stars(0.03) == "*");
  CHECK(significance_stars(0.05) == "");
  CHECK(significance_stars(0.2) == "");
}

TEST_CASE("effect-size table stars refusal-inclusive rows") {
  const Table with = effect_size_table(handmade(448));
  REQUIRE(with.rows.size() == 3);
  CHECK(with.rows[0][0] == "Flowers/Insects + Pleasant/Unpleasant");
  CHECK(with.rows[0][1] == "1.04");
  CHECK(with.rows[0][2] == "[0.94, 1.14]");
  CHECK(with.rows[1][0] == "European/African Americans + Pleasant/Unpleasant (1)");
  CHECK(with.rows[2][0] == "European/African Americans + Pleasant/Unpleasant (1)*");
  CHECK(with.rows[2][1] == "0.82");

  const Table without = effect_size_table(handmade(0));
  CHECK(without.rows.size() == 2);
  for (const auto& row : without.rows) CHECK(row[0].back() != '*');
}

TEST_CASE("model summary table") {
  const Table t = model_summary_table(handmade(448));
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[1][2] == "193.29*** (2.99)");
  CHECK(t.rows[1][5] == "2,552");
  CHECK(t.rows[2][5] == "3,000");
  AnalysisResult weak = handmade(0);
  weak.iats[0].excluded->fit->p_value = 0.2;
  CHECK(model_summary_table(weak).rows[0][2] == "62.33 (2.99)");
}

TEST_CASE("tables read values from the result") {
  AnalysisResult r = handmade(0);
  r.iats[0].excluded->effect->d = 9.87;
  CHECK(effect_size_table(r).rows[0][1] == "9.87");
  CHECK(to_csv(effect_size_csv_table(r)).find(",9.87,") != std::string::npos);
}

TEST_CASE("CSV and markdown rendering") {
  const Table t{{"a", "b"}, {{"1", "x,y"}, {"2", "p|q"}}};
  CHECK(to_csv(t) == "a,b\n1,\"x,y\"\n2,p|q\n");
  CHECK(to_markdown(t) == "| a | b |\n| --- | ---: |\n| 1 | x,y |\n| 2 | p/q |\n");
  const std::string csv = to_csv(model_summary_csv_table(handmade(448)));
  CHECK(csv.rfind("iat_id,view,intercept,intercept_se,condition,condition_se,stars,", 0) == 0);
  CHECK(count(csv, "\n") == 4);
  CHECK(count(to_csv(descriptives_csv_table(handmade(448))), "\n") == 7);
}

TEST_CASE("condition bar chart") {
  const auto series = chart_series(handmade(448));
  REQUIRE(series.size() == 2);
  const std::string svg = condition_bar_chart(series);
  CHECK(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0) == 0);
  CHECK(svg.substr(svg.size() - 7) == "</svg>\n");
  CHECK(count(svg, "class=\"bar ") == 4);
  CHECK(count(svg, "class=\"error-bar\"") == 4);
  CHECK(count(svg, "class=\"bar compatible\"") == 2);
  CHECK(svg.find("Reasoning tokens (mean &#177; SE)") != std::string::npos);
  CHECK(svg.find("Flowers/Insects + Pleasant/Unpleasant") != std::string::npos);
  CHECK(condition_bar_chart(series) == svg);

  // SD 52.45 over 1000 rows: SE 1.659 tokens.
  ChartSeries one{"IAT", {}};
  one.descriptives.compatible = {63.94, 52.45, 1000, 52.45 / std::sqrt(1000.0)};
  one.descriptives.incompatible = {126.27, 66.24, 1000, 66.24 / std::sqrt(1000.0)};
  const std::string single = condition_bar_chart(std::vector<ChartSeries>{one});
  CHECK(single.find("data-se=\"1.659\"") != std::string::npos);
  CHECK(count(single, "class=\"bar ") == 2);

  // Error-bar half-length in pixels equals SE in data units times the axis scale.
  const std::regex bar(R"re(<rect class="bar compatible"[^>]*y="([0-9.]+)" width="[0-9.]+" height="([0-9.]+)")re");
  std::smatch m;
  REQUIRE(std::regex_search(single, m, bar));
  const double px_per_token = std::stod(m[2]) / 63.94;
  const std::regex err(R"re(<g class="error-bar" data-se="1.659" stroke="#000"><line x1="[0-9.]+" y1="([0-9.]+)" x2="[0-9.]+" y2="([0-9.]+)"/>)re");
  REQUIRE(std::regex_search(single, m, err));
  const double half_px = (std::stod(m[1]) - std::stod(m[2])) / 2.0;
  CHECK(half_px / px_per_token == doctest::Approx(1.659).epsilon(0.01));
}

TEST_CASE("markdown report") {
  const std::string md = markdown_report(handmade(448));
  CHECK(md.find("**Backend:** simulator | **Seed:** 7") != std::string::npos);
  CHECK(md.find("## Configuration") != std::string::npos);
  CHECK(md.find("\"seed\": 7") != std::string::npos);
  CHECK(md.find("## Refusals") != std::string::npos);
  CHECK(md.find("| European/African Americans + Pleasant/Unpleasant (1) | incompatible | 388 | 1,500 |") !=
        std::string::npos);
  CHECK(md.find("![") != std::string::npos);
  CHECK(md.find("figure_conditions.svg") != std::string::npos);
  CHECK(md.find("multiples of 64") != std::string::npos);
  CHECK(md.find("77.50%") != std::string::npos);
  CHECK(count(md, "| Flowers/Insects + Pleasant/Unpleasant |") >= 2);

  const std::string quiet = markdown_report(handmade(0));
  CHECK(quiet.find("## Refusals") == std::string::npos);
  CHECK(markdown_report(handmade(448)) == md);
}

TEST_CASE("write_reports emits every artifact") {
  TempDir dir;
  write_reports(handmade(448), dir.path());
  for (const char* f : {"report.md", "effect_sizes.csv", "model_summaries.csv", "descriptives.csv",
                        "figure_conditions.svg"}) {
    CAPTURE(f);
    CHECK(std::filesystem::file_size(dir / f) > 0);
  }
}

TEST_CASE("full simulated run: flowers effect-size band" *
          doctest::skip(std::getenv("RMIAT_SKIP_BAND") != nullptr)) {
  TempDir dir;
  const auto& specs = builtin_catalog();
  std::map<std::string, SimProfile> profiles;
  for (const auto& s : specs) profiles[s.id] = default_sim_profile(s.id);
  SimulatorSource sim(profiles, 7);
  TrialStore store(dir.path());
  RunOptions opts;
  opts.parallelism = 4;
  run(build_plan(specs), specs, sim, store, "band", opts);
  RunInfo info;
  info.backend = "simulator";
  info.seed = 7;
  const AnalysisResult r = analyze(store.load("band"), specs, info);
  const Table t = effect_size_table(r);
  REQUIRE(t.rows[0][0] == "Flowers/Insects + Pleasant/Unpleasant");
  const double d = r.iats[0].excluded->effect->d;
  MESSAGE("flowers d = " << d);
  CHECK(d >= 0.9);
  CHECK(d <= 1.2);
  double diseases = 1.0;
  for (const auto& a : r.iats) {
    if (a.iat_id == "mental-physical-temporary-permanent") diseases = a.excluded->effect->d;
  }
  CHECK(std::abs(diseases) < 0.15);
}
