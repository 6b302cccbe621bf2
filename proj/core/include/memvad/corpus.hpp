#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace memvad {

enum class Flag : std::uint8_t { kNormal = 0, kAnomalous = 1 };

/// One caption as produced by the generator: an action category, a free-form
/// description and the class it was generated for.
struct RawCaption {
  std::string category;
  std::string description;
  Flag flag = Flag::kNormal;

  friend bool operator==(const RawCaption&, const RawCaption&) = default;
};

struct TemplatedCaption {
  std::string text;
  RawCaption source;
  /// "raw" until repulsive prompting runs, then the id of the template used.
  std::string template_id = "raw";

  friend bool operator==(const TemplatedCaption&, const TemplatedCaption&) = default;
};

/// Normals followed by anomalies. The concatenation order defines the row
/// order of the memory and therefore its flag vector (all 0s, then all 1s).
struct Corpus {
  std::vector<TemplatedCaption> normals;
  std::vector<TemplatedCaption> anomalies;
  std::string provenance;

  std::size_t size() const noexcept { return normals.size() + anomalies.size(); }
  /// Row i of the concatenated corpus.
  const TemplatedCaption& at(std::size_t i) const;
  /// Concatenated flags, length size().
  std::vector<std::uint8_t> flags() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Parses the two-collection corpus document:
///
///   {"normal":    [{"action category": "...", "description": "..."}, ...],
///    "anomalous": [{"action category": "...", "description": "..."}, ...],
///    "provenance": "optional free text"}
///
/// Throws ParseError (with line/column) for malformed JSON, RecordError for a
/// bad entry and Error(kValidation) for an empty collection.
Corpus parse_corpus(std::string_view document);

/// Inverse of parse_corpus for untemplated corpora. Templated text is not
/// part of the document schema and is dropped.
std::string serialize_corpus(const Corpus& corpus);

enum class PromptMode { kFull, kKeywordOnly, kTemplateOnly, kOff };

PromptMode parse_prompt_mode(std::string_view name);
std::string_view to_string(PromptMode mode) noexcept;

/// Named wrappers with {keyword}, {category} and {description} placeholders.
struct TemplateSet {
  std::string normal_keyword = "Normal";
  std::string anomalous_keyword = "Anomalous";
  std::string normal_template = "{keyword} event of {category}: {description}";
  std::string anomalous_template = "{keyword} event of {category}: {description}";
  std::string keyword_only_template = "{keyword}: {description}";
  std::string template_only_template = "Event of {category}: {description}";

  /// Throws Error(kConfig) when a template required by `mode` lacks a
  /// placeholder or when both classes would render identically.
  void validate(PromptMode mode) const;
};

/// Loads a template configuration file (JSON object whose keys mirror the
/// TemplateSet fields; missing keys keep their defaults).
TemplateSet load_templates(std::string_view document);

Corpus apply_repulsive_prompting(const Corpus& corpus, const TemplateSet& templates,
                                 PromptMode mode);

/// Drops repeated (category, description) pairs within each class, keeping
/// first occurrences.
Corpus deduplicate(const Corpus& corpus);

struct KeywordViolation {
  std::size_t row;
  std::string reason;
};

/// Scans every caption for the opposite class keyword appearing as a token,
/// and (in keyword-bearing modes) for its own keyword appearing other than
/// exactly once.
std::vector<KeywordViolation> check_keyword_exclusivity(const Corpus& corpus,
                                                        const TemplateSet& templates,
                                                        PromptMode mode);

/// Deterministic stand-in corpus drawn from a built-in word bank.
Corpus generate_sample_corpus(std::size_t count_per_class, std::uint64_t seed);

/// Whitespace/punctuation tokenizer shared by keyword checks and the
/// synthetic embedder.
std::vector<std::string_view> tokenize(std::string_view text);

}  // namespace memvad
