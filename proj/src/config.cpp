#include "rmiat/config.hpp"

#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "rmiat/util.hpp"

namespace rmiat {

namespace {

void check_keys(const Json& obj, std::string_view section, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(fmt::format("config section '{}' must be an object", section));
  for (const auto& [k, _] : obj.items()) {
    if (!allowed.count(k)) throw ConfigError(fmt::format("unknown config key '{}.{}'", section, k));
  }
}

template <typename T>
T get_as(const Json& obj, const char* key, std::string_view section) {
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(fmt::format("config key '{}.{}' has the wrong type", section, key));
  }
}

template <typename F>
auto parse_enum(F&& parse, const std::string& text, std::string_view where) {
  try {
    return parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", where, e.what()));
  }
}

Criterion parse_criterion(const std::string& text) {
  const std::string t = to_lower_ascii(text);
  if (t == "reml") return Criterion::REML;
  if (t == "ml") return Criterion::ML;
  throw ConfigError("criterion must be REML or ML, got '" + text + "'");
}

}  // namespace

EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
}

void apply_environment(AppConfig& config, const EnvLookup& env) {
  if (auto v = env("RMIAT_BACKEND")) config.backend.kind = parse_enum(parse_backend, *v, "RMIAT_BACKEND");
  if (auto v = env("RMIAT_ENDPOINT")) config.backend.remote.endpoint = *v;
  if (auto v = env("RMIAT_MODEL")) config.backend.remote.model.model = *v;
}

void apply_config_json(AppConfig& config, const Json& doc) {
  check_keys(doc, "<root>", {"backend", "simulator", "analysis", "output"});
  if (doc.contains("backend")) {
    const Json& b = doc["backend"];
    check_keys(b, "backend",
               {"kind", "endpoint", "model", "reasoning_effort", "api_key_env", "max_retries", "initial_backoff_ms",
                "max_backoff_ms", "timeout_s", "max_requests_per_second", "parallelism", "fixtures",
                "record_fixtures"});
    auto& r = config.backend.remote;
    if (b.contains("kind")) {
      config.backend.kind = parse_enum(parse_backend, get_as<std::string>(b, "kind", "backend"), "backend.kind");
    }
    if (b.contains("endpoint")) r.endpoint = get_as<std::string>(b, "endpoint", "backend");
    if (b.contains("model")) r.model.model = get_as<std::string>(b, "model", "backend");
    if (b.contains("reasoning_effort")) {
      if (b["reasoning_effort"].is_null()) r.model.reasoning_effort.reset();
      else r.model.reasoning_effort = get_as<std::string>(b, "reasoning_effort", "backend");
    }
    if (b.contains("api_key_env")) r.api_key_env = get_as<std::string>(b, "api_key_env", "backend");
    if (b.contains("max_retries")) r.max_retries = get_as<int>(b, "max_retries", "backend");
    if (b.contains("initial_backoff_ms")) r.initial_backoff_ms = get_as<int>(b, "initial_backoff_ms", "backend");
    if (b.contains("max_backoff_ms")) r.max_backoff_ms = get_as<int>(b, "max_backoff_ms", "backend");
    if (b.contains("timeout_s")) r.timeout_s = get_as<int>(b, "timeout_s", "backend");
    if (b.contains("max_requests_per_second")) {
      r.max_requests_per_second = get_as<double>(b, "max_requests_per_second", "backend");
    }
    if (b.contains("parallelism")) {
      const int p = get_as<int>(b, "parallelism", "backend");
      if (p < 1) throw ConfigError("backend.parallelism must be >= 1");
      config.backend.parallelism = static_cast<size_t>(p);
    }
    if (b.contains("fixtures")) config.backend.fixtures_path = get_as<std::string>(b, "fixtures", "backend");
    if (b.contains("record_fixtures")) r.record_fixtures_path = get_as<std::string>(b, "record_fixtures", "backend");
  }
  if (doc.contains("simulator")) {
    const Json& s = doc["simulator"];
    check_keys(s, "simulator", {"seed", "refusal_token_inflation", "profiles"});
    if (s.contains("seed")) config.simulator.seed = get_as<uint64_t>(s, "seed", "simulator");
    if (s.contains("refusal_token_inflation")) {
      config.simulator.refusal_token_inflation = get_as<double>(s, "refusal_token_inflation", "simulator");
    }
    if (s.contains("profiles")) {
      if (!s["profiles"].is_object()) throw ConfigError("simulator.profiles must be an object keyed by IAT id");
      for (const auto& [id, pj] : s["profiles"].items()) {
        try {
          config.simulator.profiles[id] = profile_from_json(pj);
        } catch (const std::exception& e) {
          throw ConfigError(fmt::format("simulator.profiles.{}: {}", id, e.what()));
        }
      }
    }
  }
  if (doc.contains("analysis")) {
    const Json& a = doc["analysis"];
    check_keys(a, "analysis", {"include_refusals", "criterion", "match_mode"});
    if (a.contains("include_refusals")) {
      config.analysis.include_refusals = parse_enum(parse_refusal_mode, get_as<std::string>(a, "include_refusals", "analysis"),
                                                    "analysis.include_refusals");
    }
    if (a.contains("criterion")) config.analysis.criterion = parse_criterion(get_as<std::string>(a, "criterion", "analysis"));
    if (a.contains("match_mode")) {
      config.analysis.match_mode =
          parse_enum(parse_match_mode, get_as<std::string>(a, "match_mode", "analysis"), "analysis.match_mode");
    }
  }
  if (doc.contains("output")) {
    const Json& o = doc["output"];
    check_keys(o, "output", {"dir"});
    if (o.contains("dir")) config.output.dir = get_as<std::string>(o, "dir", "output");
  }
}

AppConfig load_config(const std::optional<std::string>& path, const EnvLookup& env) {
  AppConfig config;
  apply_environment(config, env);
  if (path) {
    Json doc;
    try {
      doc = Json::parse(read_file(*path));
    } catch (const Json::parse_error& e) {
      throw ConfigError(fmt::format("{}: not valid JSON: {}", *path, e.what()));
    } catch (const std::exception& e) {
      throw ConfigError(fmt::format("{}: {}", *path, e.what()));
    }
    apply_config_json(config, doc);
  }
  return config;
}

Json config_to_json(const AppConfig& c) {
  const auto& r = c.backend.remote;
  Json profiles = Json::object();
  for (const auto& [id, p] : c.simulator.profiles) profiles[id] = profile_to_json(p);
  return Json{
      {"backend",
       {{"kind", c.backend.kind ? Json(std::string(to_string(*c.backend.kind))) : Json(nullptr)},
        {"endpoint", r.endpoint},
        {"model", r.model.model},
        {"reasoning_effort", r.model.reasoning_effort ? Json(*r.model.reasoning_effort) : Json(nullptr)},
        {"api_key_env", r.api_key_env},
        {"max_retries", r.max_retries},
        {"initial_backoff_ms", r.initial_backoff_ms},
        {"max_backoff_ms", r.max_backoff_ms},
        {"timeout_s", r.timeout_s},
        {"max_requests_per_second", r.max_requests_per_second},
        {"parallelism", c.backend.parallelism},
        {"fixtures", c.backend.fixtures_path},
        {"record_fixtures", r.record_fixtures_path}}},
      {"simulator",
       {{"seed", c.simulator.seed ? Json(*c.simulator.seed) : Json(nullptr)},
        {"refusal_token_inflation", c.simulator.refusal_token_inflation},
        {"profiles", profiles}}},
      {"analysis",
       {{"include_refusals", to_string(c.analysis.include_refusals)},
        {"criterion", to_string(c.analysis.criterion)},
        {"match_mode", to_string(c.analysis.match_mode)}}},
      {"output", {{"dir", c.output.dir}}}};
}

SimProfile resolve_sim_profile(const AppConfig& config, const std::string& iat_id) {
  if (auto it = config.simulator.profiles.find(iat_id); it != config.simulator.profiles.end()) return it->second;
  SimProfile p = default_sim_profile(iat_id);
  if (p.incompatible.refusal_probability > 0 || p.compatible.refusal_probability > 0) {
    p.refusal_token_inflation = config.simulator.refusal_token_inflation;
  }
  return p;
}

}  // namespace rmiat
