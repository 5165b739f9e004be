#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rmiat/records.hpp"

namespace rmiat {

enum class MatchMode {
  Normalized,  // trim, case-fold, strip surrounding quotes and trailing . , !
  Raw,         // byte equality with a label
};

MatchMode parse_match_mode(std::string_view text);
std::string_view to_string(MatchMode m);

std::string normalize_output(std::string_view text);

// Total and deterministic. Never returns Outcome::Failed.
Classification classify_output(std::string_view output_text, std::string_view attribute_1,
                               std::string_view attribute_2, MatchMode mode = MatchMode::Normalized);

struct RefusalCounts {
  size_t refused = 0;
  size_t total = 0;  // classified records (valid + refused), failures excluded
};

struct RefusalSummary {
  // (iat_id, condition) -> counts
  std::map<std::pair<std::string, Condition>, RefusalCounts> cells;
  size_t total_refusals = 0;
  size_t incompatible_refusals = 0;
  // Absent when there are no refusals.
  std::optional<double> incompatible_share;

  size_t refusals_for(std::string_view iat_id) const;
};

RefusalSummary refusal_summary(const std::vector<TrialRecord>& records);

struct AnalysisViews {
  std::vector<TrialRecord> excluded;   // Valid only
  std::vector<TrialRecord> inclusive;  // Valid and Refusal
};

AnalysisViews analysis_views(const std::vector<TrialRecord>& records);

// refusals.csv: iat_id, condition, variation_id, word, reasoning_tokens, output_text
std::string refusals_csv(const std::vector<TrialRecord>& records);

}  // namespace rmiat
