#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "rmiat/analysis.hpp"
#include "rmiat/gateway.hpp"
#include "rmiat/json.hpp"
#include "rmiat/refusal.hpp"

namespace rmiat {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BackendSection {
  std::optional<Backend> kind;
  RemoteConfig remote;
  std::string fixtures_path;  // replay input
  size_t parallelism = 8;
};

struct SimulatorSection {
  std::optional<uint64_t> seed;
  double refusal_token_inflation = kDefaultRefusalInflation;
  std::map<std::string, SimProfile> profiles;  // overrides by IAT id
};

struct AnalysisSection {
  RefusalMode include_refusals = RefusalMode::Auto;
  Criterion criterion = Criterion::REML;
  MatchMode match_mode = MatchMode::Normalized;
};

struct OutputSection {
  std::string dir;  // empty: <store>/analysis/<run_id>
};

struct AppConfig {
  BackendSection backend;
  SimulatorSection simulator;
  AnalysisSection analysis;
  OutputSection output;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_environment();

// Environment overrides: RMIAT_BACKEND, RMIAT_ENDPOINT, RMIAT_MODEL.
void apply_environment(AppConfig& config, const EnvLookup& env);

// Applies only the keys present in `doc`. Unknown sections or keys throw.
void apply_config_json(AppConfig& config, const Json& doc);

// defaults < environment < file. Command-line flags are applied by the caller.
AppConfig load_config(const std::optional<std::string>& path, const EnvLookup& env = process_environment());

Json config_to_json(const AppConfig& config);

// Simulator profile for an IAT: explicit override, else the calibrated default
// with the configured refusal-token inflation.
SimProfile resolve_sim_profile(const AppConfig& config, const std::string& iat_id);

}  // namespace rmiat
