#pragma once

// Text-level code heuristics shared by the offline reviewer and the
// validator's rule filters. Everything here looks at single lines or short
// runs of diff lines; there is no parsing.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cqs/diff.hpp"

namespace cqs {

// Replaces string literals with "" and drops trailing comments.
std::string strip_code(std::string_view line, std::string_view language);

bool is_comment_only(std::string_view line, std::string_view language);

// Divisor expressions of `/`, `//`, `%` (and compound forms) that are not
// numeric literals, in order of appearance.
std::vector<std::string> nonliteral_divisors(std::string_view line, std::string_view language);

// True when `line` mentions `divisor` in a zero comparison, a truthiness
// test, an assert, or a ternary.
bool guards_against_zero(std::string_view line, std::string_view divisor,
                         std::string_view language);

// Docstring or comment block immediately above the header or at the top of
// the body of `span`, looked up in the new-side lines of `file`.
bool span_has_docstring(const NumberedFile& file, const FunctionSpan& span,
                        std::string_view language);

// Span whose name matches `function` (unqualified comparison), else the
// innermost span containing `line`.
std::optional<FunctionSpan> find_span(const std::vector<FunctionSpan>& spans,
                                      const std::optional<std::string>& function, std::int64_t line);

// Lowercased alphanumeric word tokens.
std::vector<std::string> word_tokens(std::string_view text);

// |A ∩ B| / |A ∪ B| over the distinct word tokens; 1.0 when both are empty.
double token_jaccard(std::string_view a, std::string_view b);

}  // namespace cqs
