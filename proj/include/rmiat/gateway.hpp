#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>

#include "rmiat/json.hpp"
#include "rmiat/prompts.hpp"

namespace rmiat {

enum class Backend { Remote, Simulator, Replay };

std::string_view to_string(Backend b);
Backend parse_backend(std::string_view text);

struct CompletionResult {
  std::string output_text;
  int64_t reasoning_tokens = 0;
  int64_t output_tokens = 0;
  double latency_ms = 0.0;
  Backend backend = Backend::Simulator;
  Json raw_usage = Json::object();

  bool operator==(const CompletionResult&) const = default;
};

Json result_to_json(const CompletionResult& r);
CompletionResult result_from_json(const Json& j);

// Base class for everything the gateway can throw. A GatewayError raised for a
// single trial marks that trial failed; AuthError aborts the whole run.
class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AuthError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class RetriesExhaustedError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class MalformedUsageError : public GatewayError {
 public:
  MalformedUsageError(const std::string& what, std::string raw_body)
      : GatewayError(what), raw_body_(std::move(raw_body)) {}
  const std::string& raw_body() const { return raw_body_; }

 private:
  std::string raw_body_;
};

// Anything that turns a rendered prompt into a completion. Implementations
// must be safe to call from several threads at once.
class CompletionSource {
 public:
  virtual ~CompletionSource() = default;
  virtual CompletionResult complete(const RenderedPrompt& prompt) = 0;
  virtual Backend backend() const = 0;
};

// --- wire format --------------------------------------------------------

struct ModelConfig {
  std::string model = "o3-mini";
  std::optional<std::string> reasoning_effort;  // unset: provider default
};

// Single user message, no system message, no sampling overrides.
Json build_chat_request(std::string_view prompt_text, const ModelConfig& config);

// Extracts choices[0].message.content and
// usage.completion_tokens_details.reasoning_tokens. Throws MalformedUsageError
// (carrying the body) when either is missing or ill-typed.
CompletionResult parse_chat_response(std::string_view body);

// --- simulator ----------------------------------------------------------

struct ConditionParams {
  double mu = 0.0;     // log-normal location
  double sigma = 1.0;  // log-normal scale
  double refusal_probability = 0.0;

  bool operator==(const ConditionParams&) const = default;
};

struct SimProfile {
  ConditionParams compatible;
  ConditionParams incompatible;
  double refusal_token_inflation = 1.0;
  int64_t quantum = 64;

  const ConditionParams& params(Condition c) const {
    return c == Condition::Compatible ? compatible : incompatible;
  }
  bool operator==(const SimProfile&) const = default;
};

// Throws std::invalid_argument if sigma <= 0, a probability is outside [0, 1]
// or quantum < 1.
void validate_profile(const SimProfile& profile);

Json profile_to_json(const SimProfile& p);
SimProfile profile_from_json(const Json& j);

struct LogNormalParams {
  double mu;
  double sigma;
};
// Location/scale whose log-normal has the given mean and standard deviation.
LogNormalParams lognormal_from_moments(double mean, double sd);

inline constexpr std::string_view kSimulatedRefusal = "I'm sorry, but I can't help with that.";

// Refusal draws are scaled by this factor in the default race-IAT profiles.
inline constexpr double kDefaultRefusalInflation = 3.0;

// Per-condition targets that the default profiles are matched to.
struct ConditionTargets {
  double compatible_mean, compatible_sd;
  double incompatible_mean, incompatible_sd;
  int refusals;  // expected refusal count over the full plan for this IAT
};
const ConditionTargets& default_targets(std::string_view iat_id);

// Throws std::out_of_range for ids outside the builtin catalog.
SimProfile default_sim_profile(std::string_view iat_id);

// Pure function of (seed, key, profile): no hidden state, any call order.
CompletionResult simulate(const TrialKey& key, const RenderedPrompt& rendered, const SimProfile& profile,
                          uint64_t seed);

class SimulatorSource : public CompletionSource {
 public:
  SimulatorSource(std::map<std::string, SimProfile> profiles, uint64_t seed);
  CompletionResult complete(const RenderedPrompt& prompt) override;
  Backend backend() const override { return Backend::Simulator; }
  uint64_t seed() const { return seed_; }
  const std::map<std::string, SimProfile>& profiles() const { return profiles_; }

 private:
  std::map<std::string, SimProfile> profiles_;
  uint64_t seed_;
};

// --- replay -------------------------------------------------------------

// Fixture lines: {"request": <chat request>, "response": <provider body>}.
// Lookup is by SHA-256 of the user message content.
class ReplaySource : public CompletionSource {
 public:
  explicit ReplaySource(std::string_view fixture_jsonl);
  static ReplaySource from_file(const std::string& path);
  CompletionResult complete(const RenderedPrompt& prompt) override;
  Backend backend() const override { return Backend::Replay; }
  size_t size() const { return responses_.size(); }

 private:
  std::unordered_map<std::string, std::string> responses_;
};

// --- remote -------------------------------------------------------------

struct RemoteConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  ModelConfig model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::string api_key;  // resolved from api_key_env by the caller
  int max_retries = 6;
  int initial_backoff_ms = 1000;
  int max_backoff_ms = 60000;
  int timeout_s = 300;
  double max_requests_per_second = 0.0;  // 0 disables the limiter
  std::string record_fixtures_path;      // optional: append request/response pairs
};

// Spaces request starts at least 1/rate seconds apart across all threads.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second);
  void acquire();

 private:
  std::mutex mu_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

class RemoteSource : public CompletionSource {
 public:
  // Throws AuthError if no API key is available.
  explicit RemoteSource(RemoteConfig config);
  CompletionResult complete(const RenderedPrompt& prompt) override;
  Backend backend() const override { return Backend::Remote; }

  // Number of HTTP attempts made so far (including retries).
  size_t attempts() const;

 private:
  RemoteConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  RateLimiter limiter_;
  mutable std::mutex mu_;
  size_t attempts_ = 0;
};

}  // namespace rmiat
