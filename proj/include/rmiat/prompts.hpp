#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <vector>

#include "rmiat/catalog.hpp"
#include "rmiat/json.hpp"

namespace rmiat {

enum class Condition { Compatible = 0, Incompatible = 1 };
enum class WordGroup { Group1 = 1, Group2 = 2 };

std::string_view to_string(Condition c);
Condition parse_condition(std::string_view text);

inline constexpr int kVariationCount = 20;

struct TrialKey {
  std::string iat_id;
  Condition condition = Condition::Compatible;
  int variation_id = 1;
  std::string word;
  WordGroup word_group = WordGroup::Group1;

  auto operator<=>(const TrialKey&) const = default;
  bool operator==(const TrialKey&) const = default;
};

// Stable textual identity, used as a map key by the store.
std::string trial_identity(const TrialKey& key);

Json key_to_json(const TrialKey& key);
TrialKey key_from_json(const Json& j);

struct RenderedPrompt {
  TrialKey key;
  std::string text;
  std::string expected_category;  // attribute label the instruction maps the word's group to
};

// Four lines, one per category, in group_1, group_2, attribute_1, attribute_2 order.
std::string stimulus_preamble(const IatSpec& spec);

std::string condition_instruction(const IatSpec& spec, Condition condition);

// Throws std::out_of_range for variation ids outside 1..20.
std::string categorization_request(int variation_id, std::string_view word, std::string_view category_1,
                                   std::string_view category_2);

// Condition-major, then variation, then word (group_1 words then group_2 words).
std::vector<TrialKey> enumerate_trials(const IatSpec& spec);

// Throws std::invalid_argument when the key does not belong to the spec.
RenderedPrompt render(const IatSpec& spec, const TrialKey& key);

const std::string& expected_category(const IatSpec& spec, WordGroup group, Condition condition);

// One line of plan.jsonl.
struct PlanEntry {
  TrialKey key;
  std::string prompt_sha256;
};

std::vector<PlanEntry> build_plan(const std::vector<IatSpec>& specs);
std::string plan_to_jsonl(const std::vector<PlanEntry>& plan);
std::vector<PlanEntry> plan_from_jsonl(std::string_view text);
// Digest over the serialized plan; ties a run to the plan it executed.
std::string plan_digest(const std::vector<PlanEntry>& plan);

}  // namespace rmiat
