#include <doctest.h>

#include <map>

#include "rmiat/config.hpp"
#include "rmiat/util.hpp"
#include "support.hpp"

using namespace rmiat;
using rmiat::testing::TempDir;

namespace {

EnvLookup fake_env(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const std::string& name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

const EnvLookup kEmptyEnv = fake_env({});

}  // namespace

TEST_CASE("defaults") {
  const AppConfig c = load_config(std::nullopt, kEmptyEnv);
  CHECK_FALSE(c.backend.kind.has_value());
  CHECK(c.backend.parallelism == 8);
  CHECK(c.backend.remote.api_key_env == "OPENAI_API_KEY");
  CHECK_FALSE(c.simulator.seed.has_value());
  CHECK(c.simulator.refusal_token_inflation == kDefaultRefusalInflation);
  CHECK(c.analysis.include_refusals == RefusalMode::Auto);
  CHECK(c.analysis.criterion == Criterion::REML);
  CHECK(c.analysis.match_mode == MatchMode::Normalized);
  CHECK(c.output.dir.empty());
}

TEST_CASE("environment overrides defaults and the file overrides the environment") {
  const auto env = fake_env({{"RMIAT_BACKEND", "remote"}, {"RMIAT_MODEL", "env-model"},
                             {"RMIAT_ENDPOINT", "http://127.0.0.1:9/v1/chat/completions"}});
  AppConfig from_env = load_config(std::nullopt, env);
  CHECK(from_env.backend.kind == Backend::Remote);
  CHECK(from_env.backend.remote.model.model == "env-model");
  CHECK(from_env.backend.remote.endpoint == "http://127.0.0.1:9/v1/chat/completions");

  TempDir dir;
  write_file_atomic((dir / "c.json").string(), R"({"backend": {"kind": "simulator", "model": "file-model"},
                                                   "simulator": {"seed": 11}})");
  AppConfig both = load_config((dir / "c.json").string(), env);
  CHECK(both.backend.kind == Backend::Simulator);
  CHECK(both.backend.remote.model.model == "file-model");
  CHECK(both.backend.remote.endpoint == "http://127.0.0.1:9/v1/chat/completions");
  CHECK(both.simulator.seed == 11u);
}

TEST_CASE("every documented key is accepted") {
  AppConfig c;
  apply_config_json(c, Json::parse(R"({
    "backend": {"kind": "replay", "endpoint": "http://x/v1/chat/completions", "model": "m",
                "reasoning_effort": null, "api_key_env": "K", "max_retries": 2, "initial_backoff_ms": 5,
                "max_backoff_ms": 50, "timeout_s": 7, "max_requests_per_second": 2.5, "parallelism": 3,
                "fixtures": "f.jsonl", "record_fixtures": "r.jsonl"},
    "simulator": {"seed": 5, "refusal_token_inflation": 2.0},
    "analysis": {"include_refusals": "both", "criterion": "ML", "match_mode": "raw"},
    "output": {"dir": "out"}})"));
  CHECK(c.backend.kind == Backend::Replay);
  CHECK_FALSE(c.backend.remote.model.reasoning_effort.has_value());
  CHECK(c.backend.remote.api_key_env == "K");
  CHECK(c.backend.remote.max_retries == 2);
  CHECK(c.backend.remote.initial_backoff_ms == 5);
  CHECK(c.backend.remote.max_backoff_ms == 50);
  CHECK(c.backend.remote.timeout_s == 7);
  CHECK(c.backend.remote.max_requests_per_second == 2.5);
  CHECK(c.backend.parallelism == 3);
  CHECK(c.backend.fixtures_path == "f.jsonl");
  CHECK(c.backend.remote.record_fixtures_path == "r.jsonl");
  CHECK(c.simulator.refusal_token_inflation == 2.0);
  CHECK(c.analysis.include_refusals == RefusalMode::Both);
  CHECK(c.analysis.criterion == Criterion::ML);
  CHECK(c.analysis.match_mode == MatchMode::Raw);
  CHECK(c.output.dir == "out");

  // Serialization round-trips through the parser.
  AppConfig again;
  apply_config_json(again, config_to_json(c));
  CHECK(config_to_json(again) == config_to_json(c));
}

TEST_CASE("invalid configuration is rejected with the offending key") {
  AppConfig c;
  auto message = [&](const char* text) -> std::string {
    try {
      apply_config_json(c, Json::parse(text));
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message(R"({"backend": {"modle": "x"}})").find("backend.modle") != std::string::npos);
  CHECK(message(R"({"extra": {}})").find("extra") != std::string::npos);
  CHECK(message(R"({"backend": {"parallelism": 0}})").find("parallelism") != std::string::npos);
  CHECK(message(R"({"backend": {"max_retries": "six"}})").find("backend.max_retries") != std::string::npos);
  CHECK(message(R"({"backend": {"kind": "carrier-pigeon"}})").find("backend.kind") != std::string::npos);
  CHECK(message(R"({"analysis": {"criterion": "bayes"}})").find("criterion") != std::string::npos);
  CHECK(message(R"({"simulator": {"profiles": {"x": {"compatible": {"mu": 4, "sigma": -1},
                                                     "incompatible": {"mu": 4, "sigma": 1}}}}})")
            .find("simulator.profiles.x") != std::string::npos);

  TempDir dir;
  write_file_atomic((dir / "bad.json").string(), "{not json");
  CHECK_THROWS_AS(load_config((dir / "bad.json").string(), kEmptyEnv), ConfigError);
  CHECK_THROWS_AS(load_config((dir / "missing.json").string(), kEmptyEnv), ConfigError);
  CHECK_THROWS_AS(load_config(std::nullopt, fake_env({{"RMIAT_BACKEND", "nope"}})), ConfigError);
}

TEST_CASE("simulator profile resolution") {
  AppConfig c;
  const std::string race = "european-african-americans-pleasant-unpleasant-1";
  const std::string flowers = "flowers-insects-pleasant-unpleasant";
  CHECK(resolve_sim_profile(c, flowers) == default_sim_profile(flowers));
  CHECK(resolve_sim_profile(c, race) == default_sim_profile(race));

  apply_config_json(c, Json::parse(R"({"simulator": {"refusal_token_inflation": 1.5}})"));
  CHECK(resolve_sim_profile(c, race).refusal_token_inflation == 1.5);
  CHECK(resolve_sim_profile(c, flowers) == default_sim_profile(flowers));

  apply_config_json(c, Json::parse(R"({"simulator": {"profiles": {"flowers-insects-pleasant-unpleasant":
      {"compatible": {"mu": 3.0, "sigma": 0.5}, "incompatible": {"mu": 4.0, "sigma": 0.5, "refusal_probability": 0.1},
       "quantum": 32}}}})"));
  const SimProfile p = resolve_sim_profile(c, flowers);
  CHECK(p.compatible.mu == 3.0);
  CHECK(p.incompatible.refusal_probability == 0.1);
  CHECK(p.quantum == 32);
}
