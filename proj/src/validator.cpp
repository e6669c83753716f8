#include "cqs/validator.hpp"

#include "cqs/code_text.hpp"

namespace cqs {

const std::vector<std::string>& rule_ids() {
  static const std::vector<std::string> ids = {
      std::string(rule::score_threshold), std::string(rule::line_unresolved), std::string(rule::file_missing),
      std::string(rule::tag_disabled),    std::string(rule::doc_exists),      std::string(rule::no_division),
      std::string(rule::short_function)};
  return ids;
}

bool FilterConfig::enabled(std::string_view tag, std::string_view language) const {
  const std::string t(tag);
  if (auto it = tag_enabled.find({t, std::string(language)}); it != tag_enabled.end()) return it->second;
  if (auto it = tag_enabled.find({t, "*"}); it != tag_enabled.end()) return it->second;
  return true;
}

void validate_filter_config(const FilterConfig& cfg) {
  if (cfg.score_threshold < 0 || cfg.score_threshold > 10) {
    throw Error(ErrorKind::invalid_argument, "score_threshold must be within [0, 10]");
  }
  if (cfg.line_tolerance < 0) throw Error(ErrorKind::invalid_argument, "line_tolerance must be >= 0");
  if (cfg.long_function_min_lines < 0) {
    throw Error(ErrorKind::invalid_argument, "long_function_min_lines must be >= 0");
  }
}

Json to_json(const FilterOutcome& o) {
  return Json{{"issue", to_json(o.issue)},
              {"verdict", to_json(o.verdict)},
              {"decision", o.kept ? "kept" : "dropped"},
              {"reasons", o.reasons}};
}

FilterOutcome outcome_from_json(const Json& j) {
  FilterOutcome o;
  o.issue = issue_from_json(j.at("issue"));
  o.verdict = verdict_from_json(j.at("verdict"));
  o.kept = j.at("decision").get<std::string>() == "kept";
  o.reasons = j.at("reasons").get<std::vector<std::string>>();
  return o;
}

std::string issue_language(const Diff& diff, const Issue& issue) {
  std::string lang = language_for_path(issue.file);
  if (lang.empty() && !diff.meta.languages.empty()) lang = diff.meta.languages.front();
  return lang;
}

namespace {

const NumberedFile* numbered_file(const std::vector<NumberedFile>& files, std::string_view path) {
  for (const auto& f : files) {
    if (f.path == path) return &f;
  }
  return nullptr;
}

std::vector<std::int64_t> window(std::int64_t line, int tolerance) {
  std::vector<std::int64_t> out{line};
  for (int d = 1; d <= tolerance; ++d) {
    out.push_back(line - d);
    out.push_back(line + d);
  }
  return out;
}

}  // namespace

std::vector<FilterOutcome> apply_filters(const Diff& diff, const Review& review,
                                         const std::vector<JudgeVerdict>& verdicts,
                                         const FilterConfig& cfg) {
  validate_filter_config(cfg);
  if (verdicts.size() != review.issues.size()) {
    throw Error(ErrorKind::contract, std::to_string(verdicts.size()) + " verdicts for " +
                                         std::to_string(review.issues.size()) + " issues");
  }
  const auto files = numbered_view(diff);
  std::vector<FilterOutcome> out;
  out.reserve(review.issues.size());
  for (std::size_t i = 0; i < review.issues.size(); ++i) {
    const Issue& issue = review.issues[i];
    FilterOutcome o{issue, verdicts[i], false, {}};
    const bool file_present = diff.find_file(issue.file) != nullptr;
    const std::string lang = issue_language(diff, issue);

    std::optional<DiffLine> cited;
    if (file_present) {
      for (std::int64_t n : window(issue.line, cfg.line_tolerance)) {
        if (n < 1) continue;
        if ((cited = line_lookup(diff, issue.file, n))) break;
      }
    }

    if (o.verdict.score < cfg.score_threshold) o.reasons.emplace_back(rule::score_threshold);
    if (!cited) o.reasons.emplace_back(rule::line_unresolved);
    if (!file_present) o.reasons.emplace_back(rule::file_missing);
    if (!cfg.enabled(issue.tag.name(), lang)) o.reasons.emplace_back(rule::tag_disabled);

    const auto tag = issue.tag.canonical();
    const NumberedFile* nf = numbered_file(files, issue.file);
    std::optional<FunctionSpan> span;
    if (nf != nullptr && (tag == CanonicalTag::Documentation || tag == CanonicalTag::BreakdownLongFunction)) {
      span = find_span(function_spans(*nf, lang), issue.function, issue.line);
    }
    if (tag == CanonicalTag::Documentation && span && span_has_docstring(*nf, *span, lang)) {
      o.reasons.emplace_back(rule::doc_exists);
    }
    if (tag == CanonicalTag::DivisionByZero) {
      bool divides = false;
      if (file_present) {
        for (std::int64_t n : window(issue.line, cfg.line_tolerance)) {
          if (n < 1) continue;
          const auto l = line_lookup(diff, issue.file, n);
          if (l && !nonliteral_divisors(l->content, lang).empty()) {
            divides = true;
            break;
          }
        }
      }
      if (!divides) o.reasons.emplace_back(rule::no_division);
    }
    if (tag == CanonicalTag::BreakdownLongFunction && (!span || span->length <= cfg.long_function_min_lines)) {
      o.reasons.emplace_back(rule::short_function);
    }
    o.kept = o.reasons.empty();
    out.push_back(std::move(o));
  }
  return out;
}

Validation validate(const Gateway& gateway, const Diff& diff, const Review& review,
                    const FilterConfig& cfg, const JudgeOptions& judge_opts) {
  const auto verdicts = judge(gateway, diff, review, judge_opts);
  Validation v;
  v.audit = apply_filters(diff, review, verdicts, cfg);
  v.final = review;
  v.final.issues.clear();
  for (const auto& o : v.audit) {
    if (o.kept) v.final.issues.push_back(o.issue);
  }
  return v;
}

}  // namespace cqs
