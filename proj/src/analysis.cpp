#include "rmiat/analysis.hpp"

#include <algorithm>
#include <unordered_map>

#include "rmiat/util.hpp"

namespace rmiat {

RefusalMode parse_refusal_mode(std::string_view text) {
  if (text == "auto") return RefusalMode::Auto;
  if (text == "excluded") return RefusalMode::Excluded;
  if (text == "inclusive") return RefusalMode::Inclusive;
  if (text == "both") return RefusalMode::Both;
  throw std::invalid_argument("unknown refusal mode \"" + std::string(text) + "\"");
}

std::string_view to_string(RefusalMode m) {
  switch (m) {
    case RefusalMode::Auto:
      return "auto";
    case RefusalMode::Excluded:
      return "excluded";
    case RefusalMode::Inclusive:
      return "inclusive";
    case RefusalMode::Both:
      return "both";
  }
  return "auto";
}

bool IatAnalysis::has_errors() const {
  return (excluded && !excluded->error.empty()) || (inclusive && !inclusive->error.empty());
}

bool AnalysisResult::ok() const {
  return std::none_of(iats.begin(), iats.end(), [](const IatAnalysis& a) { return a.has_errors(); });
}

RunInfo run_info_from_meta(const Json& meta) {
  RunInfo info;
  info.run_id = meta.value("run_id", "");
  info.backend = meta.value("backend", "");
  info.model = meta.value("model", "");
  if (meta.contains("seed") && meta["seed"].is_number_unsigned()) info.seed = meta["seed"].get<uint64_t>();
  else if (meta.contains("seed") && meta["seed"].is_number_integer()) info.seed = static_cast<uint64_t>(meta["seed"].get<int64_t>());
  info.plan_digest = meta.value("plan_digest", "");
  // Snapshot for reports; creation time and the full specs are left out so
  // reruns of the same configuration render identically.
  info.config = meta.is_object() ? meta : Json::object();
  info.config.erase("specs");
  info.config.erase("created_at");
  return info;
}

LmmDataset to_dataset(const std::vector<TrialRecord>& records) {
  LmmDataset d;
  d.y.reserve(records.size());
  d.condition.reserve(records.size());
  d.group.reserve(records.size());
  for (const auto& r : records) {
    if (!r.result) continue;
    d.y.push_back(static_cast<double>(r.result->reasoning_tokens));
    d.condition.push_back(r.key.condition == Condition::Incompatible ? 1 : 0);
    d.group.push_back(r.key.variation_id);
  }
  return d;
}

namespace {

ViewResult analyze_view(const std::vector<TrialRecord>& rows, Criterion criterion) {
  ViewResult v;
  v.n = rows.size();
  const LmmDataset data = to_dataset(rows);
  try {
    v.descriptives = descriptives(data);
    std::vector<double> comp, inc;
    for (size_t i = 0; i < data.y.size(); ++i) (data.condition[i] ? inc : comp).push_back(data.y[i]);
    v.effect = cohens_d(comp, inc);
    v.fit = fit_random_intercept(data, criterion);
  } catch (const std::exception& e) {
    v.error = e.what();
  }
  return v;
}

}  // namespace

AnalysisResult analyze(const std::vector<TrialRecord>& records, const std::vector<IatSpec>& specs,
                       const RunInfo& run, RefusalMode mode, Criterion criterion) {
  AnalysisResult result;
  result.run = run;
  result.mode = mode;
  result.criterion = criterion;

  std::unordered_map<std::string, size_t> position;
  size_t pos = 0;
  for (const auto& spec : specs) {
    for (const auto& key : enumerate_trials(spec)) position.emplace(trial_identity(key), pos++);
  }
  std::unordered_map<std::string, std::vector<TrialRecord>> by_iat;
  for (const auto& r : records) by_iat[r.key.iat_id].push_back(r);

  std::vector<const IatSpec*> present;
  for (const auto& spec : specs) {
    if (by_iat.count(spec.id)) present.push_back(&spec);
  }
  result.iats.resize(present.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (long long k = 0; k < static_cast<long long>(present.size()); ++k) {
    const IatSpec& spec = *present[static_cast<size_t>(k)];
    std::vector<TrialRecord> rows = by_iat.at(spec.id);
    std::stable_sort(rows.begin(), rows.end(), [&](const TrialRecord& a, const TrialRecord& b) {
      auto pa = position.find(trial_identity(a.key));
      auto pb = position.find(trial_identity(b.key));
      const size_t ia = pa == position.end() ? SIZE_MAX : pa->second;
      const size_t ib = pb == position.end() ? SIZE_MAX : pb->second;
      return ia < ib;
    });

    IatAnalysis& a = result.iats[static_cast<size_t>(k)];
    a.iat_id = spec.id;
    a.display_name = spec.display_name;
    a.theme = spec.theme;
    a.records = rows.size();
    for (const auto& r : rows) {
      if (r.classified.outcome == Outcome::Refusal) ++a.refusals;
      if (r.classified.outcome == Outcome::Failed) ++a.failures;
    }
    const AnalysisViews views = analysis_views(rows);
    const bool want_excluded = mode != RefusalMode::Inclusive;
    const bool want_inclusive = mode == RefusalMode::Inclusive || mode == RefusalMode::Both ||
                                (mode == RefusalMode::Auto && a.refusals > 0);
    if (want_excluded) a.excluded = analyze_view(views.excluded, criterion);
    if (want_inclusive) a.inclusive = analyze_view(views.inclusive, criterion);
  }

  result.refusals = refusal_summary(records);

  std::vector<std::pair<std::string, ConditionDescriptives>> desc;
  for (const auto& a : result.iats) {
    const ViewResult* v = a.excluded ? &*a.excluded : (a.inclusive ? &*a.inclusive : nullptr);
    if (v && v->error.empty()) desc.emplace_back(a.iat_id, v->descriptives);
  }
  if (!desc.empty()) {
    try {
      result.overhead = overhead_percent(desc);
    } catch (const std::invalid_argument&) {
      result.overhead.reset();
    }
  }
  return result;
}

namespace {

double r6(double v) { return round_sig6(v); }

Json descriptive_json(const Descriptive& d) {
  return Json{{"mean", r6(d.mean)}, {"sd", r6(d.sd)}, {"n", d.n}, {"se", r6(d.se)}};
}

Descriptive descriptive_from(const Json& j) {
  return Descriptive{j.at("mean").get<double>(), j.at("sd").get<double>(), j.at("n").get<size_t>(),
                     j.at("se").get<double>()};
}

Json view_json(const ViewResult& v) {
  Json j{{"n", v.n},
         {"descriptives",
          {{"compatible", descriptive_json(v.descriptives.compatible)},
           {"incompatible", descriptive_json(v.descriptives.incompatible)}}}};
  if (v.fit) {
    const LmmFit& f = *v.fit;
    j["fit"] = Json{{"beta_intercept", r6(f.beta_intercept)},
                    {"se_intercept", r6(f.se_intercept)},
                    {"beta_condition", r6(f.beta_condition)},
                    {"se_condition", r6(f.se_condition)},
                    {"sigma2_u", r6(f.sigma2_u)},
                    {"sigma2_e", r6(f.sigma2_e)},
                    {"lambda", r6(f.lambda)},
                    {"loglik", r6(f.loglik)},
                    {"criterion", to_string(f.criterion)},
                    {"n", f.n},
                    {"n_groups", f.n_groups},
                    {"z", r6(f.z)},
                    {"p_value", r6(f.p_value)},
                    {"at_boundary", f.at_boundary}};
  } else {
    j["fit"] = nullptr;
  }
  if (v.effect) {
    const EffectSize& e = *v.effect;
    j["effect"] = Json{{"d", r6(e.d)},   {"ci_low", r6(e.ci_low)}, {"ci_high", r6(e.ci_high)},
                       {"n1", e.n1},     {"n2", e.n2},             {"pooled_sd", r6(e.pooled_sd)}};
  } else {
    j["effect"] = nullptr;
  }
  if (!v.error.empty()) j["error"] = v.error;
  return j;
}

ViewResult view_from(const Json& j) {
  ViewResult v;
  v.n = j.at("n").get<size_t>();
  v.descriptives.compatible = descriptive_from(j.at("descriptives").at("compatible"));
  v.descriptives.incompatible = descriptive_from(j.at("descriptives").at("incompatible"));
  if (!j.at("fit").is_null()) {
    const Json& f = j["fit"];
    LmmFit fit;
    fit.beta_intercept = f.at("beta_intercept").get<double>();
    fit.se_intercept = f.at("se_intercept").get<double>();
    fit.beta_condition = f.at("beta_condition").get<double>();
    fit.se_condition = f.at("se_condition").get<double>();
    fit.sigma2_u = f.at("sigma2_u").get<double>();
    fit.sigma2_e = f.at("sigma2_e").get<double>();
    fit.lambda = f.at("lambda").get<double>();
    fit.loglik = f.at("loglik").get<double>();
    fit.criterion = f.at("criterion").get<std::string>() == "ML" ? Criterion::ML : Criterion::REML;
    fit.n = f.at("n").get<size_t>();
    fit.n_groups = f.at("n_groups").get<size_t>();
    fit.z = f.at("z").get<double>();
    fit.p_value = f.at("p_value").get<double>();
    fit.at_boundary = f.at("at_boundary").get<bool>();
    v.fit = fit;
  }
  if (!j.at("effect").is_null()) {
    const Json& e = j["effect"];
    v.effect = EffectSize{e.at("d").get<double>(),   e.at("ci_low").get<double>(), e.at("ci_high").get<double>(),
                          e.at("n1").get<size_t>(),  e.at("n2").get<size_t>(),     e.at("pooled_sd").get<double>()};
  }
  v.error = j.value("error", "");
  return v;
}

}  // namespace

Json analysis_to_json(const AnalysisResult& r) {
  Json run{{"run_id", r.run.run_id},
           {"backend", r.run.backend},
           {"model", r.run.model},
           {"seed", r.run.seed ? Json(*r.run.seed) : Json(nullptr)},
           {"plan_digest", r.run.plan_digest},
           {"config", r.run.config}};
  Json iats = Json::array();
  for (const auto& a : r.iats) {
    iats.push_back(Json{{"iat_id", a.iat_id},
                        {"display_name", a.display_name},
                        {"theme", to_string(a.theme)},
                        {"records", a.records},
                        {"refusals", a.refusals},
                        {"failures", a.failures},
                        {"excluded", a.excluded ? view_json(*a.excluded) : Json(nullptr)},
                        {"inclusive", a.inclusive ? view_json(*a.inclusive) : Json(nullptr)}});
  }
  Json cells = Json::array();
  for (const auto& [cell, counts] : r.refusals.cells) {
    cells.push_back(Json{{"iat_id", cell.first},
                         {"condition", to_string(cell.second)},
                         {"refused", counts.refused},
                         {"total", counts.total}});
  }
  Json refusals{{"total", r.refusals.total_refusals},
                {"incompatible", r.refusals.incompatible_refusals},
                {"incompatible_share",
                 r.refusals.incompatible_share ? Json(r6(*r.refusals.incompatible_share)) : Json(nullptr)},
                {"cells", cells}};
  Json overhead = nullptr;
  if (r.overhead) {
    Json per = Json::array();
    for (const auto& [id, pct] : r.overhead->per_iat) per.push_back(Json{{"iat_id", id}, {"percent", r6(pct)}});
    overhead = Json{{"per_iat", per}, {"aggregate_percent", r6(r.overhead->aggregate)}};
  }
  return Json{{"run", run},
              {"include_refusals", to_string(r.mode)},
              {"criterion", to_string(r.criterion)},
              {"iats", iats},
              {"refusals", refusals},
              {"overhead", overhead}};
}

AnalysisResult analysis_from_json(const Json& doc) {
  AnalysisResult r;
  const Json& run = doc.at("run");
  r.run.run_id = run.value("run_id", "");
  r.run.backend = run.value("backend", "");
  r.run.model = run.value("model", "");
  if (!run.at("seed").is_null()) r.run.seed = run["seed"].get<uint64_t>();
  r.run.plan_digest = run.value("plan_digest", "");
  r.run.config = run.value("config", Json::object());
  r.mode = parse_refusal_mode(doc.at("include_refusals").get<std::string>());
  r.criterion = doc.at("criterion").get<std::string>() == "ML" ? Criterion::ML : Criterion::REML;
  for (const auto& j : doc.at("iats")) {
    IatAnalysis a;
    a.iat_id = j.at("iat_id").get<std::string>();
    a.display_name = j.at("display_name").get<std::string>();
    a.theme = parse_theme(j.at("theme").get<std::string>());
    a.records = j.at("records").get<size_t>();
    a.refusals = j.at("refusals").get<size_t>();
    a.failures = j.at("failures").get<size_t>();
    if (!j.at("excluded").is_null()) a.excluded = view_from(j["excluded"]);
    if (!j.at("inclusive").is_null()) a.inclusive = view_from(j["inclusive"]);
    r.iats.push_back(std::move(a));
  }
  const Json& ref = doc.at("refusals");
  r.refusals.total_refusals = ref.at("total").get<size_t>();
  r.refusals.incompatible_refusals = ref.at("incompatible").get<size_t>();
  if (!ref.at("incompatible_share").is_null()) r.refusals.incompatible_share = ref["incompatible_share"].get<double>();
  for (const auto& c : ref.at("cells")) {
    r.refusals.cells[{c.at("iat_id").get<std::string>(), parse_condition(c.at("condition").get<std::string>())}] =
        RefusalCounts{c.at("refused").get<size_t>(), c.at("total").get<size_t>()};
  }
  if (!doc.at("overhead").is_null()) {
    OverheadReport o;
    for (const auto& p : doc["overhead"].at("per_iat")) {
      o.per_iat.emplace_back(p.at("iat_id").get<std::string>(), p.at("percent").get<double>());
    }
    o.aggregate = doc["overhead"].at("aggregate_percent").get<double>();
    r.overhead = o;
  }
  return r;
}

}  // namespace rmiat
