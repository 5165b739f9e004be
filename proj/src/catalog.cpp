#include "rmiat/catalog.hpp"

#include <set>

#include "rmiat/util.hpp"

namespace rmiat {

namespace {

using Words = std::vector<std::string>;

const Words kPleasant25 = {"caress",  "freedom", "health",   "love",    "peace",
                           "cheer",   "friend",  "heaven",   "loyal",   "pleasure",
                           "diamond", "gentle",  "honest",   "lucky",   "rainbow",
                           "diploma", "gift",    "honor",    "miracle", "sunrise",
                           "family",  "happy",   "laughter", "paradise", "vacation"};
const Words kUnpleasant25 = {"abuse",   "crash",    "filth",   "murder",  "sickness",
                             "accident", "death",   "grief",   "poison",  "stink",
                             "assault", "disaster", "hatred",  "pollute", "tragedy",
                             "divorce", "jail",     "poverty", "ugly",    "cancer",
                             "kill",    "rotten",   "vomit",   "agony",   "prison"};
const Words kPleasant8 = {"joy", "love", "peace", "wonderful", "pleasure", "friend", "laughter", "happy"};
const Words kUnpleasant8 = {"agony", "terrible", "horrible", "nasty", "evil", "war", "awful", "failure"};

const Words kEuropeanNamesBertrand = {"Brad",  "Brendan", "Geoffrey", "Greg",   "Brett",   "Jay",
                                      "Matthew", "Neil",  "Todd",     "Allison", "Anne",   "Carrie",
                                      "Emily", "Jill",    "Laurie",   "Kristen", "Meredith", "Sarah"};
const Words kAfricanNamesBertrand = {"Darnell", "Hakim",   "Jermaine", "Kareem", "Jamal",  "Leroy",
                                     "Rasheed", "Tremayne", "Tyrone",  "Aisha",  "Ebony",  "Keisha",
                                     "Kenya",   "Latonya", "Lakisha",  "Latoya", "Tamika", "Tanisha"};

IatSpec make(std::string id, std::string display, Theme theme, CategoryDef g1, CategoryDef g2,
             CategoryDef a1, CategoryDef a2) {
  IatSpec s;
  s.id = std::move(id);
  s.display_name = std::move(display);
  s.theme = theme;
  s.compatible = {std::pair{g1.label, a1.label}, std::pair{g2.label, a2.label}};
  s.group_1 = std::move(g1);
  s.group_2 = std::move(g2);
  s.attribute_1 = std::move(a1);
  s.attribute_2 = std::move(a2);
  return s;
}

std::vector<IatSpec> build_catalog() {
  std::vector<IatSpec> c;
  c.reserve(10);
  c.push_back(make("flowers-insects-pleasant-unpleasant", "Flowers/Insects + Pleasant/Unpleasant",
                   Theme::NonSocial,
                   {"flowers",
                    {"aster", "clover", "hyacinth", "marigold", "poppy", "azalea", "crocus", "iris", "orchid",
                     "rose", "bluebell", "daffodil", "lilac", "pansy", "tulip", "buttercup", "daisy", "lily",
                     "peony", "violet", "carnation", "gladiola", "magnolia", "petunia", "zinnia"},
                    {}},
                   {"insects",
                    {"ant", "caterpillar", "flea", "locust", "spider", "bedbug", "centipede", "fly", "maggot",
                     "tarantula", "bee", "cockroach", "gnat", "mosquito", "termite", "beetle", "cricket",
                     "hornet", "moth", "wasp", "blackfly", "dragonfly", "horsefly", "roach", "weevil"},
                    {}},
                   {"pleasant", kPleasant25, {}}, {"unpleasant", kUnpleasant25, {}}));
  c.push_back(make("instruments-weapons-pleasant-unpleasant", "Instruments/Weapons + Pleasant/Unpleasant",
                   Theme::NonSocial,
                   {"instruments",
                    {"bagpipe", "cello", "guitar", "lute", "trombone", "banjo", "clarinet", "harmonica",
                     "mandolin", "trumpet", "bassoon", "drum", "harp", "oboe", "tuba", "bell", "fiddle",
                     "harpsichord", "piano", "viola", "bongo", "flute", "horn", "saxophone", "violin"},
                    {}},
                   {"weapons",
                    {"arrow", "club", "gun", "missile", "spear", "axe", "dagger", "harpoon", "pistol", "sword",
                     "blade", "dynamite", "hatchet", "rifle", "tank", "bomb", "firearm", "knife", "shotgun",
                     "teargas", "cannon", "grenade", "mace", "slingshot", "whip"},
                    {}},
                   {"pleasant", kPleasant25, {}}, {"unpleasant", kUnpleasant25, {}}));
  c.push_back(make("european-african-americans-pleasant-unpleasant-1",
                   "European/African Americans + Pleasant/Unpleasant (1)", Theme::SocialGroup,
                   {"European Americans",
                    {"Adam",     "Chip",    "Harry",   "Josh",     "Roger",     "Alan",    "Frank",
                     "Ian",      "Justin",  "Ryan",    "Andrew",   "Fred",      "Jack",    "Matthew",
                     "Stephen",  "Brad",    "Greg",    "Jed",      "Paul",      "Todd",    "Brandon",
                     "Hank",     "Jonathan", "Peter",  "Wilbur",   "Amanda",    "Courtney", "Heather",
                     "Melanie",  "Sara",    "Amber",   "Crystal",  "Katie",     "Meredith", "Shannon",
                     "Betsy",    "Donna",   "Kristin", "Nancy",    "Stephanie"},
                    {}},
                   {"African Americans",
                    {"Alonzo",   "Jamel",   "Lerone",  "Percell",  "Theo",    "Alphonse", "Jerome",
                     "Leroy",    "Rasaan",  "Torrance", "Darnell", "Lamar",   "Lionel",   "Rashaun",
                     "Tyree",    "Deion",   "Lamont",  "Malik",    "Terrence", "Tyrone",  "Aiesha",
                     "Lashelle", "Nichelle", "Shereen", "Temeka",  "Ebony",   "Latisha",  "Shaniqua",
                     "Tameisha", "Teretha", "Jasmine", "Latonya",  "Shanise", "Tanisha",  "Tia"},
                    {}},
                   {"pleasant", kPleasant25, {}}, {"unpleasant", kUnpleasant25, {}}));
  c.push_back(make("european-african-americans-pleasant-unpleasant-2",
                   "European/African Americans + Pleasant/Unpleasant (2)", Theme::SocialGroup,
                   {"European Americans", kEuropeanNamesBertrand, {}},
                   {"African Americans", kAfricanNamesBertrand, {}}, {"pleasant", kPleasant25, {}},
                   {"unpleasant", kUnpleasant25, {}}));
  c.push_back(make("european-african-americans-pleasant-unpleasant-3",
                   "European/African Americans + Pleasant/Unpleasant (3)", Theme::SocialGroup,
                   {"European Americans", kEuropeanNamesBertrand, {}},
                   {"African Americans", kAfricanNamesBertrand, {}}, {"pleasant", kPleasant8, {}},
                   {"unpleasant", kUnpleasant8, {}}));
  c.push_back(make("men-women-career-family", "Men/Women + Career/Family", Theme::SocialGroup,
                   {"men",
                    {"John", "Paul", "Mike", "Kevin", "Steve", "Greg", "Jeff", "Bill"},
                    "John, Paul, Mike, Kevin, Steve, Greg, Jeff, and Bill"},
                   {"women", {"Amy", "Joan", "Lisa", "Sarah", "Diana", "Kate", "Ann", "Donna"}, {}},
                   {"career",
                    {"executive", "management", "professional", "corporation", "salary", "office", "business",
                     "career"},
                    {}},
                   {"family",
                    {"home", "parents", "children", "family", "cousins", "marriage", "wedding", "relatives"},
                    {}}));
  c.push_back(make("men-women-math-arts", "Men/Women + Mathematics/Arts", Theme::SocialGroup,
                   {"men", {"male", "man", "boy", "brother", "he", "him", "his", "son"}, {}},
                   {"women", {"female", "woman", "girl", "sister", "she", "her", "hers", "daughter"}, {}},
                   {"math",
                    {"math", "algebra", "geometry", "calculus", "equations", "computation", "numbers",
                     "addition"},
                    {}},
                   {"arts", {"poetry", "art", "dance", "literature", "novel", "symphony", "drama", "sculpture"},
                    {}}));
  c.push_back(make("men-women-science-arts", "Men/Women + Science/Arts", Theme::SocialGroup,
                   {"men", {"brother", "father", "uncle", "grandfather", "son", "he", "his", "him"}, {}},
                   {"women", {"sister", "mother", "aunt", "grandmother", "daughter", "she", "hers", "her"}, {}},
                   {"science",
                    {"science", "technology", "physics", "chemistry", "Einstein", "NASA", "experiment",
                     "astronomy"},
                    {}},
                   {"arts",
                    {"poetry", "art", "Shakespeare", "dance", "literature", "novel", "symphony", "drama"},
                    {}}));
  c.push_back(make("mental-physical-temporary-permanent", "Mental/Physical Diseases + Temporary/Permanent",
                   Theme::NonSocial,
                   {"mental disease", {"sad", "hopeless", "gloomy", "tearful", "miserable", "depressed"}, {}},
                   {"physical disease", {"sick", "illness", "influenza", "disease", "virus", "cancer"}, {}},
                   {"temporary",
                    {"impermanent", "unstable", "variable", "fleeting", "short-term", "brief", "occasional"},
                    {}},
                   {"permanent",
                    {"stable", "always", "constant", "persistent", "chronic", "prolonged", "forever"},
                    {}}));
  c.push_back(make("young-old-pleasant-unpleasant", "Young/Old People + Pleasant/Unpleasant", Theme::SocialGroup,
                   {"young people", {"Tiffany", "Michelle", "Cindy", "Kristy", "Brad", "Eric", "Joey", "Billy"}, {}},
                   {"old people",
                    {"Ethel", "Bernice", "Gertrude", "Agnes", "Cecil", "Wilbert", "Mortimer", "Edgar"},
                    {}},
                   {"pleasant", kPleasant8, {}}, {"unpleasant", kUnpleasant8, {}}));
  return c;
}

void check_category(const CategoryDef& cat, const std::string& field, std::vector<Violation>& out) {
  if (trim(cat.label).empty()) out.push_back({field + ".label", "label is empty"});
  if (cat.words.empty()) {
    out.push_back({field + ".words", "word list is empty"});
    return;
  }
  std::set<std::string> seen;
  std::set<std::string> reported;
  for (size_t i = 0; i < cat.words.size(); ++i) {
    const std::string t = trim(cat.words[i]);
    if (t.empty()) {
      out.push_back({field + ".words[" + std::to_string(i) + "]", "word is empty"});
      continue;
    }
    const std::string folded = to_lower_ascii(t);
    if (!seen.insert(folded).second && reported.insert(folded).second) {
      out.push_back({field + ".words", "duplicate word \"" + t + "\""});
    }
  }
}

}  // namespace

std::string_view to_string(Theme theme) {
  return theme == Theme::SocialGroup ? "social-group" : "non-social";
}

Theme parse_theme(std::string_view text) {
  if (text == "social-group") return Theme::SocialGroup;
  if (text == "non-social") return Theme::NonSocial;
  throw SpecParseError("unknown theme \"" + std::string(text) + "\"");
}

std::vector<Violation> validate_spec(const IatSpec& spec) {
  std::vector<Violation> out;
  if (trim(spec.id).empty()) out.push_back({"id", "id is empty"});
  check_category(spec.group_1, "group_1", out);
  check_category(spec.group_2, "group_2", out);
  check_category(spec.attribute_1, "attribute_1", out);
  check_category(spec.attribute_2, "attribute_2", out);

  std::set<std::string> g1;
  for (const auto& w : spec.group_1.words) g1.insert(to_lower_ascii(trim(w)));
  std::set<std::string> reported;
  for (const auto& w : spec.group_2.words) {
    const std::string folded = to_lower_ascii(trim(w));
    if (!folded.empty() && g1.count(folded) && reported.insert(folded).second) {
      out.push_back({"group_2.words", "word \"" + trim(w) + "\" appears in both group categories"});
    }
  }

  if (to_lower_ascii(trim(spec.attribute_1.label)) == to_lower_ascii(trim(spec.attribute_2.label))) {
    out.push_back({"attribute_2.label", "attribute labels must be distinct"});
  }
  if (to_lower_ascii(trim(spec.group_1.label)) == to_lower_ascii(trim(spec.group_2.label))) {
    out.push_back({"group_2.label", "group labels must be distinct"});
  }

  const bool mapping_ok =
      (spec.compatible[0] == std::pair{spec.group_1.label, spec.attribute_1.label} &&
       spec.compatible[1] == std::pair{spec.group_2.label, spec.attribute_2.label}) ||
      (spec.compatible[1] == std::pair{spec.group_1.label, spec.attribute_1.label} &&
       spec.compatible[0] == std::pair{spec.group_2.label, spec.attribute_2.label});
  if (!mapping_ok) {
    out.push_back({"compatible", "compatible must pair group_1 with attribute_1 and group_2 with attribute_2 by label"});
  }
  return out;
}

const std::vector<IatSpec>& builtin_catalog() {
  static const std::vector<IatSpec> catalog = build_catalog();
  return catalog;
}

const IatSpec* find_builtin(std::string_view id) {
  for (const auto& s : builtin_catalog()) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

namespace {

std::string describe(const std::vector<Violation>& v) {
  std::string msg = "invalid IAT spec:";
  for (const auto& x : v) msg += " [" + x.field + ": " + x.message + "]";
  return msg;
}

Json category_to_json(const CategoryDef& c) {
  Json j = {{"label", c.label}, {"words", c.words}};
  if (c.listing) j["listing"] = *c.listing;
  return j;
}

CategoryDef category_from_json(const Json& j, const char* name) {
  if (!j.is_object()) throw SpecParseError(std::string(name) + " must be an object");
  CategoryDef c;
  if (!j.contains("label") || !j["label"].is_string()) throw SpecParseError(std::string(name) + ".label must be a string");
  c.label = j["label"].get<std::string>();
  if (!j.contains("words") || !j["words"].is_array()) throw SpecParseError(std::string(name) + ".words must be an array");
  for (const auto& w : j["words"]) {
    if (!w.is_string()) throw SpecParseError(std::string(name) + ".words must contain strings");
    c.words.push_back(w.get<std::string>());
  }
  if (j.contains("listing")) {
    if (!j["listing"].is_string()) throw SpecParseError(std::string(name) + ".listing must be a string");
    c.listing = j["listing"].get<std::string>();
  }
  return c;
}

}  // namespace

SpecValidationError::SpecValidationError(std::vector<Violation> violations)
    : std::runtime_error(describe(violations)), violations_(std::move(violations)) {}

Json spec_to_json(const IatSpec& spec) {
  return Json{
      {"rmiat_spec_version", kSpecSchemaVersion},
      {"id", spec.id},
      {"display_name", spec.display_name},
      {"theme", to_string(spec.theme)},
      {"group_1", category_to_json(spec.group_1)},
      {"group_2", category_to_json(spec.group_2)},
      {"attribute_1", category_to_json(spec.attribute_1)},
      {"attribute_2", category_to_json(spec.attribute_2)},
      {"compatible",
       Json::array({Json::array({spec.compatible[0].first, spec.compatible[0].second}),
                    Json::array({spec.compatible[1].first, spec.compatible[1].second})})},
  };
}

IatSpec spec_from_json(const Json& doc) {
  if (!doc.is_object()) throw SpecParseError("spec document must be an object");
  if (!doc.contains("rmiat_spec_version") || !doc["rmiat_spec_version"].is_number_integer() ||
      doc["rmiat_spec_version"].get<int>() != kSpecSchemaVersion) {
    throw SpecParseError("rmiat_spec_version must be 1");
  }
  auto str = [&](const char* key) {
    if (!doc.contains(key) || !doc[key].is_string()) throw SpecParseError(std::string(key) + " must be a string");
    return doc[key].get<std::string>();
  };
  IatSpec s;
  s.id = str("id");
  s.display_name = str("display_name");
  s.theme = parse_theme(str("theme"));
  for (const char* key : {"group_1", "group_2", "attribute_1", "attribute_2"}) {
    if (!doc.contains(key)) throw SpecParseError(std::string("missing ") + key);
  }
  s.group_1 = category_from_json(doc["group_1"], "group_1");
  s.group_2 = category_from_json(doc["group_2"], "group_2");
  s.attribute_1 = category_from_json(doc["attribute_1"], "attribute_1");
  s.attribute_2 = category_from_json(doc["attribute_2"], "attribute_2");
  const auto& comp = doc.contains("compatible") ? doc["compatible"] : Json();
  if (!comp.is_array() || comp.size() != 2) throw SpecParseError("compatible must hold two pairs");
  for (size_t i = 0; i < 2; ++i) {
    if (!comp[i].is_array() || comp[i].size() != 2 || !comp[i][0].is_string() || !comp[i][1].is_string()) {
      throw SpecParseError("compatible pairs must be [group_label, attribute_label]");
    }
    s.compatible[i] = {comp[i][0].get<std::string>(), comp[i][1].get<std::string>()};
  }
  return s;
}

IatSpec load_spec(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SpecParseError(std::string("malformed spec document: ") + e.what());
  }
  IatSpec spec = spec_from_json(doc);
  if (auto v = validate_spec(spec); !v.empty()) throw SpecValidationError(std::move(v));
  return spec;
}

std::string save_spec(const IatSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

}  // namespace rmiat
