#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rmiat/catalog.hpp"
#include "rmiat/json.hpp"
#include "rmiat/mixedfx.hpp"
#include "rmiat/records.hpp"
#include "rmiat/refusal.hpp"

namespace rmiat {

// Which token datasets to fit. Auto fits the refusal-excluded view and adds
// the refusal-inclusive view for IATs that have refusals.
enum class RefusalMode { Auto, Excluded, Inclusive, Both };

RefusalMode parse_refusal_mode(std::string_view text);
std::string_view to_string(RefusalMode m);

struct ViewResult {
  size_t n = 0;
  ConditionDescriptives descriptives;
  std::optional<LmmFit> fit;
  std::optional<EffectSize> effect;
  std::string error;  // set when the view could not be analyzed
};

struct IatAnalysis {
  std::string iat_id;
  std::string display_name;
  Theme theme = Theme::SocialGroup;
  size_t records = 0;
  size_t refusals = 0;
  size_t failures = 0;
  std::optional<ViewResult> excluded;
  std::optional<ViewResult> inclusive;

  bool has_errors() const;
};

struct RunInfo {
  std::string run_id;
  std::string backend;
  std::string model;
  std::optional<uint64_t> seed;
  std::string plan_digest;
  Json config = Json::object();  // run configuration shown in reports
};

struct AnalysisResult {
  RunInfo run;
  RefusalMode mode = RefusalMode::Auto;
  Criterion criterion = Criterion::REML;
  std::vector<IatAnalysis> iats;
  RefusalSummary refusals;
  std::optional<OverheadReport> overhead;

  bool ok() const;
};

RunInfo run_info_from_meta(const Json& meta);

// Token dataset: y = reasoning tokens, condition 0/1, group = prompt variation.
LmmDataset to_dataset(const std::vector<TrialRecord>& records);

// Records are ordered by trial plan position before fitting, so the result
// does not depend on the order trials were persisted in.
AnalysisResult analyze(const std::vector<TrialRecord>& records, const std::vector<IatSpec>& specs,
                       const RunInfo& run, RefusalMode mode = RefusalMode::Auto,
                       Criterion criterion = Criterion::REML);

// fits.json: numbers rounded to six significant digits.
Json analysis_to_json(const AnalysisResult& result);
AnalysisResult analysis_from_json(const Json& doc);

}  // namespace rmiat
