#include "rmiat/refusal.hpp"

#include <array>

#include "rmiat/util.hpp"

namespace rmiat {

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Valid:
      return "valid";
    case Outcome::Refusal:
      return "refusal";
    case Outcome::Failed:
      return "failed";
  }
  return "unknown";
}

Json record_to_json(const TrialRecord& r) {
  Json classified{{"outcome", to_string(r.classified.outcome)}};
  if (r.classified.outcome == Outcome::Valid) {
    classified["label"] = r.classified.label;
    classified["matched_form"] = r.classified.matched_form;
  }
  Json j{{"key", key_to_json(r.key)},
         {"prompt_sha256", r.prompt_sha256},
         {"result", r.result ? result_to_json(*r.result) : Json(nullptr)},
         {"classified", classified},
         {"run_id", r.run_id},
         {"recorded_at", r.recorded_at}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

TrialRecord record_from_json(const Json& j) {
  TrialRecord r;
  r.key = key_from_json(j.at("key"));
  r.prompt_sha256 = j.at("prompt_sha256").get<std::string>();
  if (!j.at("result").is_null()) r.result = result_from_json(j.at("result"));
  const Json& c = j.at("classified");
  const std::string outcome = c.at("outcome").get<std::string>();
  if (outcome == "valid") {
    r.classified.outcome = Outcome::Valid;
    r.classified.label = c.at("label").get<std::string>();
    r.classified.matched_form = c.value("matched_form", "");
  } else if (outcome == "refusal") {
    r.classified.outcome = Outcome::Refusal;
  } else if (outcome == "failed") {
    r.classified.outcome = Outcome::Failed;
  } else {
    throw std::invalid_argument("unknown outcome \"" + outcome + "\"");
  }
  r.run_id = j.at("run_id").get<std::string>();
  r.recorded_at = j.value("recorded_at", "");
  r.error = j.value("error", "");
  return r;
}

bool same_trial_values(const TrialRecord& a, const TrialRecord& b) {
  if (!(a.key == b.key && a.prompt_sha256 == b.prompt_sha256 && a.classified == b.classified &&
        a.run_id == b.run_id && a.error == b.error && a.result.has_value() == b.result.has_value())) {
    return false;
  }
  if (!a.result) return true;
  CompletionResult x = *a.result, y = *b.result;
  x.latency_ms = y.latency_ms = 0.0;
  return x == y;
}

MatchMode parse_match_mode(std::string_view text) {
  if (text == "normalized") return MatchMode::Normalized;
  if (text == "raw") return MatchMode::Raw;
  throw std::invalid_argument("unknown match mode \"" + std::string(text) + "\"");
}

std::string_view to_string(MatchMode m) { return m == MatchMode::Normalized ? "normalized" : "raw"; }

namespace {

constexpr std::array<std::string_view, 7> kQuotes = {"\"", "'", "`", "“", "”", "‘", "’"};

bool strip_prefix_quote(std::string& s) {
  for (auto q : kQuotes) {
    if (s.size() >= q.size() && s.compare(0, q.size(), q) == 0) {
      s.erase(0, q.size());
      return true;
    }
  }
  return false;
}

bool ends_with_quote(const std::string& s, size_t& len) {
  for (auto q : kQuotes) {
    if (s.size() >= q.size() && s.compare(s.size() - q.size(), q.size(), q) == 0) {
      len = q.size();
      return true;
    }
  }
  return false;
}

bool starts_with_quote(const std::string& s) {
  for (auto q : kQuotes) {
    if (s.size() >= q.size() && s.compare(0, q.size(), q) == 0) return true;
  }
  return false;
}

}  // namespace

std::string normalize_output(std::string_view text) {
  std::string s = trim(text);
  while (true) {
    const std::string before = s;
    while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == '!')) s.pop_back();
    s = trim(s);
    size_t qlen = 0;
    if (s.size() >= 2 && starts_with_quote(s) && ends_with_quote(s, qlen)) {
      s.erase(s.size() - qlen);
      strip_prefix_quote(s);
      s = trim(s);
    }
    if (s == before) break;
  }
  return to_lower_ascii(s);
}

Classification classify_output(std::string_view output_text, std::string_view attribute_1,
                               std::string_view attribute_2, MatchMode mode) {
  if (mode == MatchMode::Raw) {
    for (auto label : {attribute_1, attribute_2}) {
      if (output_text == label) return {Outcome::Valid, std::string(label), std::string(label)};
    }
    return {Outcome::Refusal, "", ""};
  }
  const std::string norm = normalize_output(output_text);
  for (auto label : {attribute_1, attribute_2}) {
    if (norm == normalize_output(label)) return {Outcome::Valid, std::string(label), norm};
  }
  return {Outcome::Refusal, "", ""};
}

size_t RefusalSummary::refusals_for(std::string_view iat_id) const {
  size_t n = 0;
  for (const auto& [cell, counts] : cells) {
    if (cell.first == iat_id) n += counts.refused;
  }
  return n;
}

RefusalSummary refusal_summary(const std::vector<TrialRecord>& records) {
  RefusalSummary s;
  for (const auto& r : records) {
    if (r.classified.outcome == Outcome::Failed) continue;
    auto& cell = s.cells[{r.key.iat_id, r.key.condition}];
    ++cell.total;
    if (r.classified.outcome == Outcome::Refusal) {
      ++cell.refused;
      ++s.total_refusals;
      if (r.key.condition == Condition::Incompatible) ++s.incompatible_refusals;
    }
  }
  if (s.total_refusals > 0) {
    s.incompatible_share = static_cast<double>(s.incompatible_refusals) / static_cast<double>(s.total_refusals);
  }
  return s;
}

AnalysisViews analysis_views(const std::vector<TrialRecord>& records) {
  AnalysisViews v;
  for (const auto& r : records) {
    if (r.classified.outcome == Outcome::Failed || !r.result) continue;
    v.inclusive.push_back(r);
    if (r.classified.outcome == Outcome::Valid) v.excluded.push_back(r);
  }
  return v;
}

std::string refusals_csv(const std::vector<TrialRecord>& records) {
  std::string out = "iat_id,condition,variation_id,word,reasoning_tokens,output_text\n";
  for (const auto& r : records) {
    if (r.classified.outcome != Outcome::Refusal || !r.result) continue;
    const std::vector<std::string> row = {r.key.iat_id, std::string(to_string(r.key.condition)),
                                          std::to_string(r.key.variation_id), r.key.word,
                                          std::to_string(r.result->reasoning_tokens), r.result->output_text};
    out += csv_row(row);
  }
  return out;
}

}  // namespace rmiat
