// rmiat: catalog, plan, run, analyze and report for reasoning-model IAT studies.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rmiat/analysis.hpp"
#include "rmiat/catalog.hpp"
#include "rmiat/config.hpp"
#include "rmiat/gateway.hpp"
#include "rmiat/prompts.hpp"
#include "rmiat/refusal.hpp"
#include "rmiat/reporting.hpp"
#include "rmiat/runner.hpp"
#include "rmiat/util.hpp"

namespace fs = std::filesystem;
using namespace rmiat;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) out += (i ? ", " : "") + words[i];
  return out;
}

// Builtin specs plus any loaded from files; file specs shadow builtins.
std::map<std::string, IatSpec> available_specs(const std::vector<std::string>& spec_files) {
  std::map<std::string, IatSpec> specs;
  for (const auto& s : builtin_catalog()) specs.emplace(s.id, s);
  for (const auto& path : spec_files) {
    IatSpec s = load_spec(read_file(path));
    specs.insert_or_assign(s.id, std::move(s));
  }
  return specs;
}

std::vector<IatSpec> select_specs(const std::string& iat_arg, const std::vector<std::string>& spec_files) {
  const auto specs = available_specs(spec_files);
  std::vector<IatSpec> out;
  if (iat_arg == "all") {
    for (const auto& s : builtin_catalog()) out.push_back(specs.at(s.id));
    for (const auto& [id, s] : specs) {
      if (!find_builtin(id)) out.push_back(s);
    }
    return out;
  }
  std::set<std::string> seen;
  for (auto id : split(iat_arg, ',')) {
    id = trim(id);
    if (id.empty() || !seen.insert(id).second) continue;
    auto it = specs.find(id);
    if (it == specs.end()) throw UsageError(fmt::format("unknown IAT id '{}' (see `rmiat catalog list`)", id));
    out.push_back(it->second);
  }
  if (out.empty()) throw UsageError("--iat selected no IATs");
  return out;
}

// Specs referenced by a plan, in first-appearance order.
std::vector<IatSpec> specs_for_plan(const std::vector<PlanEntry>& plan, const std::vector<std::string>& spec_files) {
  const auto specs = available_specs(spec_files);
  std::vector<IatSpec> out;
  std::set<std::string> seen;
  for (const auto& e : plan) {
    if (!seen.insert(e.key.iat_id).second) continue;
    auto it = specs.find(e.key.iat_id);
    if (it == specs.end()) {
      throw UsageError(fmt::format("plan references IAT '{}' which is not builtin; pass its file with --spec",
                                   e.key.iat_id));
    }
    out.push_back(it->second);
  }
  return out;
}

void print_plan_counts(const std::vector<IatSpec>& specs, const std::vector<PlanEntry>& plan) {
  std::map<std::string, size_t> counts;
  for (const auto& e : plan) ++counts[e.key.iat_id];
  for (const auto& s : specs) fmt::print("{:<48} {:>6}\n", s.id, counts[s.id]);
  fmt::print("total {}\n", plan.size());
}

// --- catalog -----------------------------------------------------------

int cmd_catalog_list() {
  fmt::print("{:<48} {:<12} {:>7} {:>11} {:>7}\n", "id", "theme", "groups", "attributes", "trials");
  for (const auto& s : builtin_catalog()) {
    fmt::print("{:<48} {:<12} {:>7} {:>11} {:>7}\n", s.id, to_string(s.theme),
               fmt::format("{}+{}", s.group_1.words.size(), s.group_2.words.size()),
               fmt::format("{}+{}", s.attribute_1.words.size(), s.attribute_2.words.size()),
               enumerate_trials(s).size());
  }
  return 0;
}

int cmd_catalog_show(const std::string& id, bool as_json) {
  const IatSpec* s = find_builtin(id);
  if (!s) throw UsageError(fmt::format("unknown IAT id '{}' (see `rmiat catalog list`)", id));
  if (as_json) {
    fmt::print("{}\n", spec_to_json(*s).dump(2));
    return 0;
  }
  fmt::print("{} ({})\ntheme: {}\n", s->display_name, s->id, to_string(s->theme));
  for (const CategoryDef* c : {&s->group_1, &s->group_2, &s->attribute_1, &s->attribute_2}) {
    fmt::print("{} ({}): {}\n", c->label, c->words.size(), join_words(c->words));
  }
  fmt::print("compatible: {} ~ {}, {} ~ {}\n", s->compatible[0].first, s->compatible[0].second,
             s->compatible[1].first, s->compatible[1].second);
  return 0;
}

int cmd_catalog_validate(const std::string& path) {
  IatSpec spec;
  try {
    spec = spec_from_json(Json::parse(read_file(path)));
  } catch (const Json::exception& e) {
    fmt::print(stderr, "{}: not a valid spec document: {}\n", path, e.what());
    return 1;
  } catch (const SpecParseError& e) {
    fmt::print(stderr, "{}: {}\n", path, e.what());
    return 1;
  }
  const auto violations = validate_spec(spec);
  if (violations.empty()) {
    fmt::print("{}: ok ({} trials)\n", path, enumerate_trials(spec).size());
    return 0;
  }
  for (const auto& v : violations) fmt::print(stderr, "{}: {}: {}\n", path, v.field, v.message);
  return 1;
}

// --- run ---------------------------------------------------------------

struct RunArgs {
  std::string plan_path;
  std::string iat = "all";
  std::vector<std::string> spec_files;
  std::string store = "store";
  std::string run_id = "default";
  std::string backend;
  std::optional<uint64_t> seed;
  std::optional<size_t> parallelism;
  std::optional<size_t> limit;
  bool resume = false;
  std::string fixtures;
  std::string record_fixtures;
  std::string endpoint;
  std::string model;
  std::string reasoning_effort;
  std::string match_mode;
  std::optional<std::string> config;
};

int cmd_run(const RunArgs& a) {
  AppConfig cfg = load_config(a.config);
  if (!a.backend.empty()) cfg.backend.kind = parse_backend(a.backend);
  if (a.seed) cfg.simulator.seed = a.seed;
  if (a.parallelism) cfg.backend.parallelism = *a.parallelism;
  if (!a.fixtures.empty()) cfg.backend.fixtures_path = a.fixtures;
  if (!a.record_fixtures.empty()) cfg.backend.remote.record_fixtures_path = a.record_fixtures;
  if (!a.endpoint.empty()) cfg.backend.remote.endpoint = a.endpoint;
  if (!a.model.empty()) cfg.backend.remote.model.model = a.model;
  if (!a.reasoning_effort.empty()) cfg.backend.remote.model.reasoning_effort = a.reasoning_effort;
  if (!a.match_mode.empty()) cfg.analysis.match_mode = parse_match_mode(a.match_mode);
  if (!cfg.backend.kind) throw UsageError("no backend selected: pass --backend remote|sim|replay");
  if (cfg.backend.parallelism < 1) throw UsageError("--parallelism must be >= 1");

  std::vector<PlanEntry> plan;
  std::vector<IatSpec> specs;
  if (!a.plan_path.empty()) {
    plan = plan_from_jsonl(read_file(a.plan_path));
    specs = specs_for_plan(plan, a.spec_files);
  } else {
    specs = select_specs(a.iat, a.spec_files);
    plan = build_plan(specs);
  }

  Json meta{{"backend", std::string(to_string(*cfg.backend.kind))}, {"match_mode", to_string(cfg.analysis.match_mode)}};
  std::unique_ptr<CompletionSource> source;
  switch (*cfg.backend.kind) {
    case Backend::Simulator: {
      if (!cfg.simulator.seed) throw UsageError("the sim backend requires --seed (or simulator.seed in the config)");
      std::map<std::string, SimProfile> profiles;
      Json pj = Json::object();
      for (const auto& s : specs) {
        profiles[s.id] = resolve_sim_profile(cfg, s.id);
        pj[s.id] = profile_to_json(profiles[s.id]);
      }
      meta["seed"] = *cfg.simulator.seed;
      meta["profiles"] = pj;
      source = std::make_unique<SimulatorSource>(std::move(profiles), *cfg.simulator.seed);
      break;
    }
    case Backend::Replay: {
      if (cfg.backend.fixtures_path.empty()) throw UsageError("the replay backend requires --fixtures FILE");
      meta["model"] = cfg.backend.remote.model.model;
      meta["fixtures"] = cfg.backend.fixtures_path;
      source = std::make_unique<ReplaySource>(ReplaySource::from_file(cfg.backend.fixtures_path));
      break;
    }
    case Backend::Remote: {
      RemoteConfig rc = cfg.backend.remote;
      if (rc.endpoint.empty()) throw UsageError("the remote backend requires an endpoint (--endpoint or RMIAT_ENDPOINT)");
      if (auto key = process_environment()(rc.api_key_env)) rc.api_key = *key;
      meta["model"] = rc.model.model;
      meta["reasoning_effort"] = rc.model.reasoning_effort ? Json(*rc.model.reasoning_effort) : Json(nullptr);
      meta["endpoint"] = rc.endpoint;
      source = std::make_unique<RemoteSource>(std::move(rc));
      break;
    }
  }

  TrialStore store(a.store);
  RunOptions opts;
  opts.parallelism = cfg.backend.parallelism;
  opts.limit = a.limit;
  opts.match_mode = cfg.analysis.match_mode;

  RunSummary summary;
  const auto existing = store.run_meta(a.run_id);
  if (a.resume && existing) {
    if (existing->value("backend", "") != meta["backend"].get<std::string>()) {
      throw UsageError(fmt::format("run '{}' was started with backend '{}'", a.run_id, existing->value("backend", "")));
    }
    if (meta.contains("seed") && existing->contains("seed") && (*existing)["seed"] != meta["seed"]) {
      throw UsageError(fmt::format("run '{}' was started with seed {}", a.run_id, (*existing)["seed"].dump()));
    }
    summary = resume(plan, specs, *source, store, a.run_id, opts, meta);
  } else {
    if (existing && !a.resume) {
      throw StoreError(fmt::format("run '{}' already exists in {}; pass --resume to continue it or choose another "
                                   "--run-id",
                                   a.run_id, a.store));
    }
    summary = run(plan, specs, *source, store, a.run_id, opts, meta);
  }

  for (const auto& [k, c] : summary.counts) {
    fmt::print("{:<48} {:<12} completed {:>5}  refused {:>4}  failed {:>4}\n", k.first, to_string(k.second),
               c.completed, c.refused, c.failed);
  }
  const auto t = summary.totals();
  fmt::print("{} trials executed ({} skipped, {} refused, {} failed) in {:.1f} s\n", summary.executed, summary.skipped,
             t.refused, t.failed, summary.wall_seconds);
  return t.failed > 0 ? 1 : 0;
}

// --- analyze / report -------------------------------------------------------

struct AnalyzeArgs {
  std::string store = "store";
  std::string run_id;
  std::string include_refusals;
  std::string criterion;
  std::string out;
  std::optional<std::string> config;
};

void print_analysis(const AnalysisResult& r) {
  for (const auto& a : r.iats) {
    for (const auto& [name, view] : {std::pair{"excluded", &a.excluded}, std::pair{"inclusive", &a.inclusive}}) {
      if (!*view) continue;
      const auto& v = **view;
      if (!v.error.empty()) {
        fmt::print(stderr, "{} [{}]: {}\n", a.iat_id, name, v.error);
        continue;
      }
      fmt::print("{:<48} {:<9} n={:<5} beta={:>8.2f} (SE {:.2f}) d={:>6.2f}\n", a.iat_id, name, v.n,
                 v.fit ? v.fit->beta_condition : 0.0, v.fit ? v.fit->se_condition : 0.0,
                 v.effect ? v.effect->d : 0.0);
    }
  }
  if (r.overhead) fmt::print("overhead (unweighted mean) {:.2f}%\n", r.overhead->aggregate);
}

int cmd_analyze(const AnalyzeArgs& a) {
  AppConfig cfg = load_config(a.config);
  if (!a.include_refusals.empty()) cfg.analysis.include_refusals = parse_refusal_mode(a.include_refusals);
  if (!a.criterion.empty()) {
    Json patch{{"analysis", {{"criterion", a.criterion}}}};
    apply_config_json(cfg, patch);
  }
  if (!a.out.empty()) cfg.output.dir = a.out;

  if (!fs::exists(fs::path(a.store) / "trials.jsonl")) throw UsageError(fmt::format("{}: no trial store found", a.store));
  TrialStore store(a.store);
  std::string run_id = a.run_id;
  if (run_id.empty()) {
    const auto ids = store.run_ids();
    if (ids.empty()) throw UsageError(fmt::format("{}: store has no runs", a.store));
    if (ids.size() > 1) throw UsageError(fmt::format("{}: store has {} runs; pick one with --run-id", a.store, ids.size()));
    run_id = ids.front();
  }
  const auto meta = store.run_meta(run_id);
  if (!meta) throw UsageError(fmt::format("{}: no run '{}'", a.store, run_id));
  const auto records = store.load(run_id);
  if (records.empty()) throw UsageError(fmt::format("{}: run '{}' has no trial records", a.store, run_id));

  const auto specs = specs_from_meta(*meta);
  const AnalysisResult result =
      analyze(records, specs, run_info_from_meta(*meta), cfg.analysis.include_refusals, cfg.analysis.criterion);

  const fs::path out = cfg.output.dir.empty() ? fs::path(a.store) / "analysis" / run_id : fs::path(cfg.output.dir);
  fs::create_directories(out);
  write_file_atomic((out / "fits.json").string(), analysis_to_json(result).dump(2) + "\n");
  write_file_atomic((out / "refusals.csv").string(), refusals_csv(records));
  // Reports render from the persisted fits so `report` reproduces them exactly.
  const AnalysisResult persisted = analysis_from_json(Json::parse(read_file((out / "fits.json").string())));
  write_reports(persisted, out);

  print_analysis(result);
  fmt::print("wrote {}\n", out.string());
  return result.ok() ? 0 : 1;
}

int cmd_report(const std::string& analysis_dir, const std::string& out) {
  const fs::path dir(analysis_dir);
  const AnalysisResult result = analysis_from_json(Json::parse(read_file((dir / "fits.json").string())));
  const fs::path target = out.empty() ? dir : fs::path(out);
  write_reports(result, target);
  fmt::print("wrote {}\n", (target / "report.md").string());
  return result.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reasoning-model implicit association tests: catalog, plan, run, analyze, report"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rmiat 0.1.0");

  auto* catalog = app.add_subcommand("catalog", "Inspect and validate IAT specs");
  catalog->require_subcommand(1);
  auto* cat_list = catalog->add_subcommand("list", "List builtin IATs");
  auto* cat_show = catalog->add_subcommand("show", "Print one builtin IAT");
  std::string show_id;
  bool show_json = false;
  cat_show->add_option("id", show_id, "IAT id")->required();
  cat_show->add_flag("--json", show_json, "Print as a spec document");
  auto* cat_validate = catalog->add_subcommand("validate", "Validate a spec file");
  std::string validate_path;
  cat_validate->add_option("file", validate_path, "Spec file")->required();

  auto* plan_cmd = app.add_subcommand("plan", "Enumerate trials and write a plan file");
  std::string plan_iat = "all", plan_out;
  std::vector<std::string> plan_specs;
  plan_cmd->add_option("--iat", plan_iat, "Comma-separated IAT ids or 'all'")->capture_default_str();
  plan_cmd->add_option("--spec", plan_specs, "Additional spec files");
  plan_cmd->add_option("--out", plan_out, "Plan file (JSON lines)");

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Execute a plan against a backend");
  run_cmd->add_option("--plan", run_args.plan_path, "Plan file; default plans --iat");
  run_cmd->add_option("--iat", run_args.iat, "IATs to plan when --plan is absent")->capture_default_str();
  run_cmd->add_option("--spec", run_args.spec_files, "Spec files for non-builtin IATs");
  run_cmd->add_option("--store", run_args.store, "Trial store directory")->capture_default_str();
  run_cmd->add_option("--run-id", run_args.run_id, "Run identifier")->capture_default_str();
  run_cmd->add_option("--backend", run_args.backend, "remote, sim or replay");
  run_cmd->add_option("--seed", run_args.seed, "Simulator seed");
  run_cmd->add_option("--parallelism", run_args.parallelism, "Concurrent trials");
  run_cmd->add_option("--limit", run_args.limit, "Stop after this many trials");
  run_cmd->add_flag("--resume", run_args.resume, "Execute only trials missing from the store");
  run_cmd->add_option("--fixtures", run_args.fixtures, "Replay fixture file");
  run_cmd->add_option("--record-fixtures", run_args.record_fixtures, "Append remote request/response pairs here");
  run_cmd->add_option("--endpoint", run_args.endpoint, "Chat-completions URL");
  run_cmd->add_option("--model", run_args.model, "Model name");
  run_cmd->add_option("--reasoning-effort", run_args.reasoning_effort, "low, medium or high");
  run_cmd->add_option("--match-mode", run_args.match_mode, "normalized or raw");
  run_cmd->add_option("--config", run_args.config, "Config file");

  AnalyzeArgs an_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "Fit models and write reports for a run");
  analyze_cmd->add_option("--store", an_args.store, "Trial store directory")->capture_default_str();
  analyze_cmd->add_option("--run-id", an_args.run_id, "Run to analyze; default the only run");
  analyze_cmd->add_option("--include-refusals", an_args.include_refusals, "auto, excluded, inclusive or both");
  analyze_cmd->add_option("--criterion", an_args.criterion, "REML or ML");
  analyze_cmd->add_option("--out", an_args.out, "Output directory; default <store>/analysis/<run-id>");
  analyze_cmd->add_option("--config", an_args.config, "Config file");

  auto* report_cmd = app.add_subcommand("report", "Regenerate reports from fits.json");
  std::string report_dir, report_out;
  std::optional<std::string> report_config;
  report_cmd->add_option("--analysis", report_dir, "Directory containing fits.json")->required();
  report_cmd->add_option("--out", report_out, "Output directory; default the analysis directory");
  report_cmd->add_option("--config", report_config, "Config file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (catalog->parsed()) {
      if (cat_list->parsed()) return cmd_catalog_list();
      if (cat_show->parsed()) return cmd_catalog_show(show_id, show_json);
      if (cat_validate->parsed()) return cmd_catalog_validate(validate_path);
    }
    if (plan_cmd->parsed()) {
      const auto specs = select_specs(plan_iat, plan_specs);
      const auto plan = build_plan(specs);
      if (!plan_out.empty()) write_file_atomic(plan_out, plan_to_jsonl(plan));
      print_plan_counts(specs, plan);
      return 0;
    }
    if (run_cmd->parsed()) return cmd_run(run_args);
    if (analyze_cmd->parsed()) return cmd_analyze(an_args);
    if (report_cmd->parsed()) {
      if (report_config) {
        AppConfig cfg = load_config(report_config);
        if (report_out.empty()) report_out = cfg.output.dir;
      }
      return cmd_report(report_dir, report_out);
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
