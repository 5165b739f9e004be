#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rmiat/json.hpp"

namespace rmiat {

enum class Theme { SocialGroup, NonSocial };

std::string_view to_string(Theme theme);
Theme parse_theme(std::string_view text);

struct CategoryDef {
  std::string label;
  std::vector<std::string> words;
  // Literal word list used verbatim in the stimulus preamble when the
  // published prompt text differs from a plain ", " join.
  std::optional<std::string> listing;

  bool operator==(const CategoryDef&) const = default;
};

// One RM-IAT. The compatible pairing is group_1 -> attribute_1 and
// group_2 -> attribute_2; `compatible` restates it by label so that spec
// files carry the declaration explicitly.
struct IatSpec {
  std::string id;
  std::string display_name;
  Theme theme = Theme::SocialGroup;
  CategoryDef group_1;
  CategoryDef group_2;
  CategoryDef attribute_1;
  CategoryDef attribute_2;
  std::array<std::pair<std::string, std::string>, 2> compatible;

  size_t group_word_count() const { return group_1.words.size() + group_2.words.size(); }
  bool operator==(const IatSpec&) const = default;
};

struct Violation {
  std::string field;
  std::string message;
};

// Empty result means the spec is valid. Reports every violation found.
std::vector<Violation> validate_spec(const IatSpec& spec);

// The ten RM-IATs with their original word stimuli, in publication order.
const std::vector<IatSpec>& builtin_catalog();
const IatSpec* find_builtin(std::string_view id);

class SpecParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SpecValidationError : public std::runtime_error {
 public:
  explicit SpecValidationError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

inline constexpr int kSpecSchemaVersion = 1;

Json spec_to_json(const IatSpec& spec);
// Parses without validating; throws SpecParseError on schema mismatch.
IatSpec spec_from_json(const Json& doc);

// Parse + validate. Throws SpecParseError or SpecValidationError.
IatSpec load_spec(std::string_view text);
std::string save_spec(const IatSpec& spec);

}  // namespace rmiat
