#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cqs/error.hpp"

namespace cqs {

using Json = nlohmann::ordered_json;

enum class CanonicalTag {
  DedupeLogic,
  DictionaryKeyExistenceCheck,
  UseConstant,
  RenamingVariable,
  DomainSpecificName,
  BreakdownLongFunction,
  ExtractMethod,
  ResourceLeak,
  Documentation,
  DivisionByZero,
  Typo,
  RenamingFunction,
};

inline constexpr std::size_t kCanonicalTagCount = 12;

struct CanonicalTagInfo {
  CanonicalTag tag;
  std::string_view name;
  std::string_view criterion;
};

// The collector's tag menu, in prompt order.
const std::array<CanonicalTagInfo, kCanonicalTagCount>& canonical_tags();

// Either one of the twelve canonical tags or a model-invented one. Custom
// names are trimmed, non-empty and single-line.
class IssueTag {
 public:
  IssueTag(CanonicalTag tag) : value_(tag) {}  // NOLINT(google-explicit-constructor)

  static IssueTag custom(std::string name);

  bool is_canonical() const { return std::holds_alternative<CanonicalTag>(value_); }
  std::optional<CanonicalTag> canonical() const;
  std::string_view name() const;

  friend bool operator==(const IssueTag&, const IssueTag&) = default;
  friend auto operator<=>(const IssueTag& a, const IssueTag& b) { return a.name() <=> b.name(); }

 private:
  explicit IssueTag(std::string custom) : value_(std::move(custom)) {}
  std::variant<CanonicalTag, std::string> value_;
};

struct Issue {
  IssueTag tag = CanonicalTag::Documentation;
  std::optional<std::string> function;  // absent == NULL in the wire format
  std::string rationale;
  std::string file;
  std::int64_t line = 1;

  friend bool operator==(const Issue&, const Issue&) = default;
};

struct Provenance {
  std::string backend_id;
  double temperature = 0.0;
  int sample_index = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Review {
  std::string diff_id;
  std::vector<Issue> issues;
  Provenance provenance;
  int warnings = 0;  // issue blocks dropped as unparseable

  friend bool operator==(const Review&, const Review&) = default;
};

struct DiffMeta {
  std::string title;
  std::string summary;
  bool author_is_bot = false;
  bool is_test_only = false;
  int human_comment_count = 0;
  std::vector<std::string> languages;

  friend bool operator==(const DiffMeta&, const DiffMeta&) = default;
};

std::string trim(std::string_view s);

// Exact, case-sensitive lookup; anything else becomes a custom tag.
// Throws Error(invalid_tag) on empty or multi-line input.
IssueTag canonical_tag(std::string_view s);

void validate_issue(const Issue& issue);

// Accepts one issue block, JSON-like or YAML-like, optionally fenced.
// Keys are matched case-insensitively; `problematic_function` and
// `relevant_file` alias `function` and `file`.
Issue parse_issue_block(std::string_view text);

// Canonical block in the collector's example-output shape.
std::string serialize_issue(const Issue& issue);

// Same block with capitalised keys, as the judge and curation prompts show it.
std::string serialize_issue_titlecase(const Issue& issue);

struct IssueBlocks {
  std::vector<Issue> issues;
  int warnings = 0;
};

// Splits a model response into issue blocks and parses each one. Blocks that
// fail to parse are counted, never fatal.
IssueBlocks parse_issue_blocks(std::string_view response);

// Raw block texts found in a response (JSON array items, brace groups, or
// blank-line separated YAML-ish paragraphs).
std::vector<std::string> split_blocks(std::string_view response);

Json to_json(const Issue& issue);
Issue issue_from_json(const Json& j);
Json to_json(const Review& review);
Review review_from_json(const Json& j);
Json to_json(const DiffMeta& meta);
DiffMeta meta_from_json(const Json& j);

}  // namespace cqs
