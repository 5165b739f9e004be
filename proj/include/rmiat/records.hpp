#pragma once

#include <optional>
#include <string>

#include "rmiat/gateway.hpp"
#include "rmiat/prompts.hpp"

namespace rmiat {

enum class Outcome { Valid, Refusal, Failed };

std::string_view to_string(Outcome o);

struct Classification {
  Outcome outcome = Outcome::Refusal;
  std::string label;         // attribute label, Valid only
  std::string matched_form;  // normalized text that matched, Valid only

  bool operator==(const Classification&) const = default;
};

// One persisted categorization call. `result` is empty for Failed trials:
// a failed call never carries a token count.
struct TrialRecord {
  TrialKey key;
  std::string prompt_sha256;
  std::optional<CompletionResult> result;
  Classification classified;
  std::string error;
  std::string run_id;
  std::string recorded_at;
};

Json record_to_json(const TrialRecord& r);
TrialRecord record_from_json(const Json& j);

// Equality on everything that a deterministic backend controls: excludes
// recorded_at and latency.
bool same_trial_values(const TrialRecord& a, const TrialRecord& b);

}  // namespace rmiat
