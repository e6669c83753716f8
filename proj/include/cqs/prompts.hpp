#pragma once

// Prompt templates for every model call in the pipeline. Templates are kept
// byte-stable; golden tests pin them.

#include <string>
#include <string_view>
#include <vector>

#include "cqs/core_model.hpp"

namespace cqs::prompts {

inline constexpr std::string_view kCollectorDiffBegin = "=== Raw Source Control Code Changes BEGIN ===";
inline constexpr std::string_view kCollectorDiffEnd = "=== Raw Source Control Code Changes END ===";
inline constexpr std::string_view kChangeBegin = "=== Raw Source Control Code Change BEGIN ===";
inline constexpr std::string_view kChangeEnd = "=== Raw Source Control Code Change END ===";
inline constexpr std::string_view kSuggestionsBegin = "=== Suggestions (YAML Format) BEGIN ===";
inline constexpr std::string_view kSuggestionsEnd = "=== Suggestions (YAML Format) END ===";
inline constexpr std::string_view kReviewBegin = "=== Code Review (YAML FORMAT) BEGIN ===";
inline constexpr std::string_view kReviewEnd = "=== Code Review (YAML FORMAT) END ===";
inline constexpr std::string_view kFeedbackDiffBegin = "=== Raw Source Control Diff BEGIN ===";
inline constexpr std::string_view kFeedbackDiffEnd = "=== Raw Source Control Diff END ===";
inline constexpr std::string_view kRationaleA = "=== Rationale A ===";
inline constexpr std::string_view kRationaleB = "=== Rationale B ===";
inline constexpr std::string_view kRationaleEnd = "=== End ===";

// System messages paired with the user templates below.
inline constexpr std::string_view kCollectorSystem =
    "You are an experienced software engineer reviewing a code change for code quality issues.";
inline constexpr std::string_view kJudgeSystem =
    "You are an experienced software engineer grading code review suggestions.";
inline constexpr std::string_view kCurationSystem =
    "You are an experienced software engineer curating code review training data.";
inline constexpr std::string_view kEquivalenceSystem =
    "You compare two code review issue rationales for semantic equivalence.";

// Tag menu: canonical tags present in `tags` in canonical order, then custom
// tags in the order given.
std::string collector(std::string_view numbered_diff, const DiffMeta& meta,
                      const std::vector<IssueTag>& tags);

std::string judge_scoring(std::string_view numbered_diff, const std::vector<Issue>& issues);

std::string validator_system();
std::string validator_user(std::string_view numbered_diff, const std::vector<Issue>& issues);

std::string rewrite_human_review(std::string_view numbered_diff, const Issue& issue);

std::string feedback_critique(std::string_view numbered_diff, const Issue& issue, bool thumbs_up,
                              std::string_view comment);

std::string equivalence(std::string_view rationale_a, std::string_view rationale_b);

// Text between the first line equal to `begin` and the next line equal to
// `end`, without the delimiters; npos-safe (returns "" when absent).
std::string section(std::string_view text, std::string_view begin, std::string_view end);

}  // namespace cqs::prompts
