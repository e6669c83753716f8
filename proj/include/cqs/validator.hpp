#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cqs/diff.hpp"
#include "cqs/judge.hpp"

namespace cqs {

namespace rule {
inline constexpr std::string_view score_threshold = "score-threshold";
inline constexpr std::string_view line_unresolved = "line-unresolved";
inline constexpr std::string_view file_missing = "file-missing";
inline constexpr std::string_view tag_disabled = "tag-disabled";
inline constexpr std::string_view doc_exists = "doc-exists";
inline constexpr std::string_view no_division = "no-division";
inline constexpr std::string_view short_function = "short-function";
}  // namespace rule

// Rule ids in evaluation order.
const std::vector<std::string>& rule_ids();

struct FilterConfig {
  int score_threshold = 7;
  int line_tolerance = 0;
  int long_function_min_lines = 50;
  // (tag name, language) -> enabled. Language "*" matches any language.
  // Pairs not listed are enabled.
  std::map<std::pair<std::string, std::string>, bool> tag_enabled;

  bool enabled(std::string_view tag, std::string_view language) const;
};

void validate_filter_config(const FilterConfig& cfg);

struct FilterOutcome {
  Issue issue;
  JudgeVerdict verdict;
  bool kept = false;
  std::vector<std::string> reasons;  // empty iff kept

  friend bool operator==(const FilterOutcome&, const FilterOutcome&) = default;
};

Json to_json(const FilterOutcome& o);
FilterOutcome outcome_from_json(const Json& j);

// Language an issue is judged under: its file extension, else the diff's
// first declared language.
std::string issue_language(const Diff& diff, const Issue& issue);

// Evaluates every rule on every issue and records all that fire.
// Throws Error(contract) when verdicts and issues are not aligned.
std::vector<FilterOutcome> apply_filters(const Diff& diff, const Review& review,
                                         const std::vector<JudgeVerdict>& verdicts,
                                         const FilterConfig& cfg);

struct Validation {
  Review final;
  std::vector<FilterOutcome> audit;
};

Validation validate(const Gateway& gateway, const Diff& diff, const Review& review,
                    const FilterConfig& cfg, const JudgeOptions& judge_opts);

}  // namespace cqs
