#include "memvad/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <utility>

#include <json.hpp>

#include "memvad/error.hpp"
#include "rng.hpp"

namespace memvad {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::string_view kNormalKey = "normal";
constexpr std::string_view kAnomalousKey = "anomalous";
constexpr std::string_view kCategoryKey = "action category";
constexpr std::string_view kDescriptionKey = "description";

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::pair<std::size_t, std::size_t> line_and_column(std::string_view doc, std::size_t byte) {
  // nlohmann reports the 1-based index of the byte it stopped on.
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, doc.size());
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < end; ++i) {
    if (doc[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

std::vector<TemplatedCaption> parse_collection(const json& root, std::string_view key,
                                               Flag flag) {
  const auto it = root.find(key);
  if (it == root.end()) {
    throw Error(ErrorCategory::kValidation,
                "corpus document has no \"" + std::string(key) + "\" collection");
  }
  if (!it->is_array()) {
    throw Error(ErrorCategory::kValidation,
                "corpus collection \"" + std::string(key) + "\" is not an array");
  }
  std::vector<TemplatedCaption> out;
  out.reserve(it->size());
  const std::string collection(key);
  for (std::size_t i = 0; i < it->size(); ++i) {
    const json& entry = (*it)[i];
    const std::string where = collection + "[" + std::to_string(i) + "]";
    if (!entry.is_object()) throw RecordError(where + ": entry is not an object", collection, i);
    RawCaption raw;
    raw.flag = flag;
    for (auto [field, target] : {std::pair{kCategoryKey, &raw.category},
                                 std::pair{kDescriptionKey, &raw.description}}) {
      const auto f = entry.find(field);
      if (f == entry.end()) {
        throw RecordError(where + ": missing \"" + std::string(field) + "\"", collection, i);
      }
      if (!f->is_string()) {
        throw RecordError(where + ": \"" + std::string(field) + "\" is not a string",
                          collection, i);
      }
      *target = f->get<std::string>();
      if (is_blank(*target)) {
        throw RecordError(where + ": \"" + std::string(field) + "\" is empty", collection, i);
      }
    }
    TemplatedCaption caption;
    caption.text = raw.description;
    caption.source = std::move(raw);
    out.push_back(std::move(caption));
  }
  if (out.empty()) {
    throw Error(ErrorCategory::kValidation,
                "corpus collection \"" + collection + "\" is empty");
  }
  return out;
}

std::size_t count_placeholder(std::string_view tmpl, std::string_view name) {
  std::size_t count = 0;
  for (std::size_t pos = tmpl.find(name); pos != std::string_view::npos;
       pos = tmpl.find(name, pos + name.size())) {
    ++count;
  }
  return count;
}

/// Single left-to-right pass so substituted values are never re-expanded.
std::string render(std::string_view tmpl, std::string_view keyword, const RawCaption& raw) {
  std::string out;
  out.reserve(tmpl.size() + raw.category.size() + raw.description.size() + keyword.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        const auto name = tmpl.substr(i + 1, close - i - 1);
        if (name == "keyword") {
          out += keyword;
          i = close + 1;
          continue;
        }
        if (name == "category") {
          out += raw.category;
          i = close + 1;
          continue;
        }
        if (name == "description") {
          out += raw.description;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

void require(std::string_view tmpl, std::string_view which, std::string_view placeholder,
             std::size_t expected) {
  const std::size_t n = count_placeholder(tmpl, placeholder);
  if (n != expected) {
    throw Error(ErrorCategory::kConfig,
                std::string(which) + " template must contain " + std::string(placeholder) +
                    " exactly " + std::to_string(expected) + " time(s), found " +
                    std::to_string(n));
  }
}

TemplatedCaption prompt_one(const TemplatedCaption& in, const TemplateSet& t, PromptMode mode) {
  const RawCaption& raw = in.source;
  const bool anomalous = raw.flag == Flag::kAnomalous;
  const std::string& keyword = anomalous ? t.anomalous_keyword : t.normal_keyword;
  TemplatedCaption out;
  out.source = raw;
  switch (mode) {
    case PromptMode::kFull:
      out.text = render(anomalous ? t.anomalous_template : t.normal_template, keyword, raw);
      out.template_id = anomalous ? "anomalous" : "normal";
      break;
    case PromptMode::kKeywordOnly:
      out.text = render(t.keyword_only_template, keyword, raw);
      out.template_id = "keyword_only";
      break;
    case PromptMode::kTemplateOnly:
      out.text = render(t.template_only_template, "", raw);
      out.template_id = "template_only";
      break;
    case PromptMode::kOff:
      out.text = raw.description;
      out.template_id = "raw";
      break;
  }
  return out;
}

struct WordBankEntry {
  std::string_view category;
  std::array<std::string_view, 3> actions;
};

constexpr std::array<WordBankEntry, 8> kNormalBank{{
    {"walking", {"walks slowly", "walks with a dog", "walks while carrying bags"}},
    {"shopping", {"browses shelves", "pays at the counter", "carries a shopping basket"}},
    {"cycling", {"rides a bicycle", "locks a bike to a rack", "pedals past parked cars"}},
    {"talking", {"chats with a friend", "talks on a phone", "waves to a neighbor"}},
    {"waiting", {"waits in line", "sits on a bench", "checks the time"}},
    {"jogging", {"jogs at a steady pace", "stretches before a run", "runs with headphones"}},
    {"driving", {"parks a car", "drives through slowly", "opens a car door"}},
    {"reading", {"reads a newspaper", "looks at a map", "reads a sign"}},
}};

constexpr std::array<WordBankEntry, 8> kAnomalousBank{{
    {"fighting",
     {"throws punches at another person", "wrestles someone to the ground",
      "kicks a man repeatedly"}},
    {"robbery",
     {"grabs a purse and flees", "threatens a cashier for money",
      "snatches a phone from a stranger"}},
    {"shooting",
     {"fires a gun into the crowd", "points a pistol at people", "shoots at a passing car"}},
    {"vandalism",
     {"smashes a window with a bat", "sprays graffiti on a wall", "kicks over a trash can"}},
    {"arson", {"sets a car on fire", "throws a burning bottle", "pours fuel and lights it"}},
    {"burglary",
     {"breaks a lock and enters", "climbs through a broken window", "pries open a back door"}},
    {"assault",
     {"shoves a stranger violently", "strikes a person with a stick", "attacks a passerby"}},
    {"shoplifting",
     {"hides merchandise in a jacket", "runs out without paying", "slips items into a bag"}},
}};

constexpr std::array<std::string_view, 10> kSubjects{
    "a man",      "a woman",  "two teenagers", "an elderly person", "a group of friends",
    "a delivery worker", "a student", "a couple", "a security guard", "a child"};

constexpr std::array<std::string_view, 10> kPlaces{
    "on a busy sidewalk", "inside a convenience store", "in a parking lot",
    "near a bus stop",    "at a subway entrance",       "in a quiet alley",
    "outside a bank",     "across a crosswalk",         "in a shopping mall",
    "beside a gas station"};

template <std::size_t N>
std::vector<TemplatedCaption> draw(const std::array<WordBankEntry, N>& bank, Flag flag,
                                   std::size_t count, detail::SplitMix64& rng) {
  std::vector<TemplatedCaption> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& entry = bank[rng.below(bank.size())];
    const auto action = entry.actions[rng.below(entry.actions.size())];
    const auto subject = kSubjects[rng.below(kSubjects.size())];
    const auto place = kPlaces[rng.below(kPlaces.size())];
    TemplatedCaption c;
    c.source.category = std::string(entry.category);
    c.source.description =
        std::string(subject) + " " + std::string(action) + " " + std::string(place);
    c.source.flag = flag;
    c.text = c.source.description;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

const TemplatedCaption& Corpus::at(std::size_t i) const {
  return i < normals.size() ? normals[i] : anomalies.at(i - normals.size());
}

std::vector<std::uint8_t> Corpus::flags() const {
  std::vector<std::uint8_t> y(size(), 0);
  std::fill(y.begin() + static_cast<std::ptrdiff_t>(normals.size()), y.end(), 1);
  return y;
}

Corpus parse_corpus(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_and_column(document, e.byte);
    throw ParseError("malformed corpus document at line " + std::to_string(line) +
                         ", column " + std::to_string(column) + ": " + e.what(),
                     line, column);
  }
  if (!root.is_object()) {
    throw ParseError("corpus document must be a JSON object", 1, 1);
  }
  Corpus corpus;
  corpus.normals = parse_collection(root, kNormalKey, Flag::kNormal);
  corpus.anomalies = parse_collection(root, kAnomalousKey, Flag::kAnomalous);
  if (const auto p = root.find("provenance"); p != root.end() && p->is_string()) {
    corpus.provenance = p->get<std::string>();
  }
  return corpus;
}

std::string serialize_corpus(const Corpus& corpus) {
  auto collection = [](const std::vector<TemplatedCaption>& captions) {
    ordered_json arr = ordered_json::array();
    for (const auto& c : captions) {
      ordered_json entry;
      entry[std::string(kCategoryKey)] = c.source.category;
      entry[std::string(kDescriptionKey)] = c.source.description;
      arr.push_back(std::move(entry));
    }
    return arr;
  };
  ordered_json root;
  root[std::string(kNormalKey)] = collection(corpus.normals);
  root[std::string(kAnomalousKey)] = collection(corpus.anomalies);
  if (!corpus.provenance.empty()) root["provenance"] = corpus.provenance;
  return root.dump(2) + "\n";
}

PromptMode parse_prompt_mode(std::string_view name) {
  if (name == "full") return PromptMode::kFull;
  if (name == "keyword_only") return PromptMode::kKeywordOnly;
  if (name == "template_only") return PromptMode::kTemplateOnly;
  if (name == "off") return PromptMode::kOff;
  throw Error(ErrorCategory::kConfig, "unknown prompting mode: " + std::string(name));
}

std::string_view to_string(PromptMode mode) noexcept {
  switch (mode) {
    case PromptMode::kFull: return "full";
    case PromptMode::kKeywordOnly: return "keyword_only";
    case PromptMode::kTemplateOnly: return "template_only";
    case PromptMode::kOff: return "off";
  }
  return "unknown";
}

void TemplateSet::validate(PromptMode mode) const {
  switch (mode) {
    case PromptMode::kFull:
      if (normal_keyword.empty() || anomalous_keyword.empty()) {
        throw Error(ErrorCategory::kConfig, "class keywords must be non-empty");
      }
      for (auto [name, tmpl] : {std::pair{"normal", &normal_template},
                                std::pair{"anomalous", &anomalous_template}}) {
        require(*tmpl, name, "{keyword}", 1);
        require(*tmpl, name, "{category}", 1);
        require(*tmpl, name, "{description}", 1);
      }
      if (normal_keyword == anomalous_keyword && normal_template == anomalous_template) {
        throw Error(ErrorCategory::kConfig, "normal and anomalous templates render identically");
      }
      break;
    case PromptMode::kKeywordOnly:
      if (normal_keyword.empty() || anomalous_keyword.empty() ||
          normal_keyword == anomalous_keyword) {
        throw Error(ErrorCategory::kConfig, "class keywords must be non-empty and distinct");
      }
      require(keyword_only_template, "keyword_only", "{keyword}", 1);
      require(keyword_only_template, "keyword_only", "{description}", 1);
      break;
    case PromptMode::kTemplateOnly:
      require(template_only_template, "template_only", "{keyword}", 0);
      require(template_only_template, "template_only", "{category}", 1);
      require(template_only_template, "template_only", "{description}", 1);
      break;
    case PromptMode::kOff:
      break;
  }
}

TemplateSet load_templates(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_and_column(document, e.byte);
    throw ParseError("malformed template file at line " + std::to_string(line) + ", column " +
                         std::to_string(column),
                     line, column);
  }
  if (!root.is_object()) throw ParseError("template file must be a JSON object", 1, 1);
  TemplateSet t;
  const std::pair<const char*, std::string*> fields[] = {
      {"normal_keyword", &t.normal_keyword},
      {"anomalous_keyword", &t.anomalous_keyword},
      {"normal", &t.normal_template},
      {"anomalous", &t.anomalous_template},
      {"keyword_only", &t.keyword_only_template},
      {"template_only", &t.template_only_template},
  };
  for (const auto& [key, target] : fields) {
    if (const auto it = root.find(key); it != root.end()) {
      if (!it->is_string()) {
        throw Error(ErrorCategory::kConfig, std::string("template field ") + key +
                                                " must be a string");
      }
      *target = it->get<std::string>();
    }
  }
  return t;
}

Corpus apply_repulsive_prompting(const Corpus& corpus, const TemplateSet& templates,
                                 PromptMode mode) {
  templates.validate(mode);
  Corpus out;
  out.provenance = corpus.provenance;
  out.normals.reserve(corpus.normals.size());
  out.anomalies.reserve(corpus.anomalies.size());
  for (const auto& c : corpus.normals) out.normals.push_back(prompt_one(c, templates, mode));
  for (const auto& c : corpus.anomalies) out.anomalies.push_back(prompt_one(c, templates, mode));
  return out;
}

Corpus deduplicate(const Corpus& corpus) {
  auto unique = [](const std::vector<TemplatedCaption>& in) {
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<TemplatedCaption> out;
    for (const auto& c : in) {
      if (seen.emplace(c.source.category, c.source.description).second) out.push_back(c);
    }
    return out;
  };
  Corpus out;
  out.provenance = corpus.provenance;
  out.normals = unique(corpus.normals);
  out.anomalies = unique(corpus.anomalies);
  return out;
}

std::vector<std::string_view> tokenize(std::string_view text) {
  std::vector<std::string_view> tokens;
  auto is_word = [](unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; };
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && is_word(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

std::vector<KeywordViolation> check_keyword_exclusivity(const Corpus& corpus,
                                                        const TemplateSet& templates,
                                                        PromptMode mode) {
  const bool keyword_mode = mode == PromptMode::kFull || mode == PromptMode::kKeywordOnly;
  std::vector<KeywordViolation> violations;
  for (std::size_t row = 0; row < corpus.size(); ++row) {
    const auto& c = corpus.at(row);
    const bool anomalous = c.source.flag == Flag::kAnomalous;
    const std::string& own = anomalous ? templates.anomalous_keyword : templates.normal_keyword;
    const std::string& other = anomalous ? templates.normal_keyword : templates.anomalous_keyword;
    std::size_t own_count = 0;
    bool has_other = false;
    for (auto tok : tokenize(c.text)) {
      if (tok == own) ++own_count;
      if (tok == other) has_other = true;
    }
    if (has_other) violations.push_back({row, "contains opposite keyword \"" + other + "\""});
    if (keyword_mode && own_count != 1) {
      violations.push_back({row, "class keyword \"" + own + "\" occurs " +
                                     std::to_string(own_count) + " times"});
    }
  }
  return violations;
}

Corpus generate_sample_corpus(std::size_t count_per_class, std::uint64_t seed) {
  if (count_per_class == 0) {
    throw Error(ErrorCategory::kConfig, "count_per_class must be at least 1");
  }
  detail::SplitMix64 rng(detail::mix64(seed, 0x636f72707573ULL));
  Corpus corpus;
  corpus.normals = draw(kNormalBank, Flag::kNormal, count_per_class, rng);
  corpus.anomalies = draw(kAnomalousBank, Flag::kAnomalous, count_per_class, rng);
  corpus.provenance = "memvad sample generator; seed=" + std::to_string(seed) +
                      "; count_per_class=" + std::to_string(count_per_class);
  return corpus;
}

}  // namespace memvad
