// Offline stand-in for the model. Each prompt family is recognised by its
// delimiters and answered with fixed text rules, so runs are reproducible.

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "cqs/code_text.hpp"
#include "cqs/gateway.hpp"
#include "cqs/prompts.hpp"

namespace cqs {
namespace {

constexpr int kGuardLookback = 5;
constexpr std::int64_t kLongFunctionLines = 50;
constexpr std::size_t kDedupeWindow = 3;
constexpr std::size_t kDedupeMinChars = 20;

enum class Rule { documentation, long_function, division, dedupe };

struct Found {
  Issue issue;
  Rule rule;
};

std::string backticked(const std::string& name) { return "`" + name + "`"; }

// First divisor on `number` with no zero check on that line or the few
// new-side lines before it.
std::optional<std::string> unguarded_divisor(const NumberedFile& file, std::int64_t number,
                                             std::string_view lang) {
  for (const auto& seg : new_side_segments(file)) {
    for (std::size_t k = 0; k < seg.size(); ++k) {
      if (seg[k].number != number) continue;
      if (is_comment_only(seg[k].content, lang)) return std::nullopt;
      for (const auto& d : nonliteral_divisors(seg[k].content, lang)) {
        bool guarded = false;
        const std::size_t from = k >= kGuardLookback ? k - kGuardLookback : 0;
        for (std::size_t g = from; g <= k && !guarded; ++g) {
          guarded = guards_against_zero(seg[g].content, d, lang);
        }
        if (!guarded) return d;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

const NumberedLine* new_side_line(const NumberedFile& file, std::int64_t number) {
  for (const auto& l : file.lines) {
    if (l.marker != LineMarker::removed && l.number == number) return &l;
  }
  return nullptr;
}

std::optional<std::string> enclosing_function(const std::vector<FunctionSpan>& spans,
                                              std::int64_t line) {
  if (auto s = find_span(spans, std::nullopt, line)) return s->name;
  return std::nullopt;
}

void documentation_and_length(const NumberedFile& file, std::string_view lang,
                              const std::vector<FunctionSpan>& spans, std::vector<Found>& out) {
  for (const auto& span : spans) {
    if (!span.header_added) continue;
    if (!span_has_docstring(file, span, lang)) {
      out.push_back({Issue{CanonicalTag::Documentation, span.name,
                           "Could we add a short docstring to " + backticked(span.name) +
                               " describing what it does, its parameters and its return value? "
                               "That would make the new unit easier to use correctly.",
                           file.path, span.start},
                     Rule::documentation});
    }
    if (span.length > kLongFunctionLines) {
      out.push_back({Issue{CanonicalTag::BreakdownLongFunction, span.name,
                           backticked(span.name) + " now spans " + std::to_string(span.length) +
                               " lines. Would it be clearer to split it into smaller functions "
                               "that each handle one step?",
                           file.path, span.start},
                     Rule::long_function});
    }
  }
}

void division(const NumberedFile& file, std::string_view lang,
              const std::vector<FunctionSpan>& spans, std::vector<Found>& out) {
  for (const auto& l : file.lines) {
    if (l.marker != LineMarker::added) continue;
    const auto d = unguarded_divisor(file, l.number, lang);
    if (!d) continue;
    out.push_back({Issue{CanonicalTag::DivisionByZero, enclosing_function(spans, l.number),
                         "Could " + backticked(*d) +
                             " be zero here? Would it be safer to check it before dividing and "
                             "handle that case explicitly?",
                         file.path, l.number},
                   Rule::division});
  }
}

struct Window {
  std::string key;
  std::string path;
  std::int64_t line;
};

std::vector<Window> added_windows(const NumberedFile& file, std::string_view lang) {
  std::vector<Window> windows;
  for (const auto& seg : new_side_segments(file)) {
    for (std::size_t k = 0; k + kDedupeWindow <= seg.size(); ++k) {
      std::string key;
      bool ok = true;
      std::size_t chars = 0;
      for (std::size_t w = k; w < k + kDedupeWindow && ok; ++w) {
        const std::string code = trim(strip_code(seg[w].content, lang));
        ok = seg[w].marker == LineMarker::added && !code.empty() &&
             !is_comment_only(seg[w].content, lang);
        chars += code.size();
        key += code;
        key += '\n';
      }
      if (ok && chars >= kDedupeMinChars) windows.push_back({key, file.path, seg[k].number});
    }
  }
  return windows;
}

void dedupe(const std::vector<NumberedFile>& files, std::vector<Found>& out) {
  std::map<std::string, Window> first_seen;
  std::map<std::string, std::int64_t> suppress_until;  // per path
  for (const auto& file : files) {
    const std::string lang = language_for_path(file.path);
    if (lang.empty()) continue;
    const auto spans = function_spans(file, lang);
    for (const auto& w : added_windows(file, lang)) {
      auto [it, inserted] = first_seen.emplace(w.key, w);
      if (inserted) continue;
      const Window& orig = it->second;
      const bool overlaps =
          orig.path == w.path && w.line < orig.line + static_cast<std::int64_t>(kDedupeWindow);
      if (overlaps) continue;
      auto& until = suppress_until[w.path];
      if (w.line < until) continue;
      until = w.line + static_cast<std::int64_t>(kDedupeWindow);
      out.push_back({Issue{CanonicalTag::DedupeLogic, enclosing_function(spans, w.line),
                           "These lines repeat the logic added at " + orig.path + ":" +
                               std::to_string(orig.line) +
                               ". Could the shared part move into one helper function?",
                           w.path, w.line},
                     Rule::dedupe});
    }
  }
}

// ---------------------------------------------------------------------------
// Judge

struct Verdict {
  std::string content;
  bool valid;
  bool line_matching;
  int score;
  std::string reason;
};

int score_for(const IssueTag& tag) {
  if (!tag.canonical()) return 5;
  switch (*tag.canonical()) {
    case CanonicalTag::DivisionByZero:
    case CanonicalTag::ResourceLeak:
      return 8;
    case CanonicalTag::DictionaryKeyExistenceCheck:
    case CanonicalTag::BreakdownLongFunction:
    case CanonicalTag::Documentation:
      return 7;
    case CanonicalTag::DedupeLogic:
      return 6;
    default:
      return 5;
  }
}

Verdict judge_issue(const std::vector<NumberedFile>& files, const Issue& issue) {
  Verdict v{issue.rationale, false, false, 0, ""};
  const NumberedFile* file = nullptr;
  for (const auto& f : files) {
    if (f.path == issue.file) file = &f;
  }
  if (file == nullptr) {
    v.reason = "the file " + issue.file + " is not part of the code change";
    return v;
  }
  const NumberedLine* line = new_side_line(*file, issue.line);
  v.line_matching = line != nullptr;
  if (!v.line_matching) {
    v.reason = "line " + std::to_string(issue.line) + " is not a new-side line of the change";
    return v;
  }
  std::string lang = language_for_path(file->path);
  const auto spans = lang.empty() ? std::vector<FunctionSpan>{} : function_spans(*file, lang);
  const auto span = find_span(spans, issue.function, issue.line);
  bool ok = true;
  switch (issue.tag.canonical().value_or(CanonicalTag::Typo)) {
    case CanonicalTag::Documentation:
      ok = span && !span_has_docstring(*file, *span, lang);
      v.reason = ok ? "the function has no docstring or comment" : "a docstring or comment is already present";
      break;
    case CanonicalTag::DivisionByZero:
      ok = unguarded_divisor(*file, issue.line, lang).has_value();
      v.reason = ok ? "the divisor is a variable with no zero check nearby"
                    : "the line has no unchecked division by a variable";
      break;
    case CanonicalTag::BreakdownLongFunction:
      ok = span && span->length > kLongFunctionLines;
      v.reason = ok ? "the function is longer than 50 lines" : "the function is not longer than 50 lines";
      break;
    case CanonicalTag::DedupeLogic:
      ok = line->marker == LineMarker::added;
      v.reason = ok ? "the cited code is newly added" : "the cited code was not changed";
      break;
    default:
      v.reason = "the cited line is part of the change";
      break;
  }
  if (!issue.tag.canonical()) v.reason = "the cited line is part of the change";
  v.valid = ok;
  v.score = ok ? score_for(issue.tag) : 0;
  v.reason = (ok ? "the code review suggestion is correct and actionable because " : "the suggestion is incorrect because ") + v.reason;
  return v;
}

std::string strip_yaml_fence(std::string s) {
  const std::string fence = "```yaml\n";
  if (s.rfind(fence, 0) == 0) s.erase(0, fence.size());
  return s;
}

std::string answer_judge(const std::string& user, bool with_motivation) {
  const auto files = parse_numbered(prompts::section(user, prompts::kChangeBegin, prompts::kChangeEnd));
  const std::string suggestions =
      strip_yaml_fence(prompts::section(user, prompts::kSuggestionsBegin, prompts::kSuggestionsEnd));
  const auto blocks = parse_issue_blocks(suggestions);
  if (blocks.issues.empty()) return "";
  std::ostringstream out;
  out << "```yaml\n";
  for (const auto& issue : blocks.issues) {
    const Verdict v = judge_issue(files, issue);
    out << "{\n";
    if (with_motivation) {
      out << "\"motivation\": " << Json("checked " + issue.file + ":" + std::to_string(issue.line) + "; " + v.reason).dump() << "\n";
    }
    out << "\"Suggestion_content\": " << Json(v.content).dump() << "\n"
        << "\"Status\": " << (v.valid ? "valid" : "invalid") << "\n"
        << "\"Sentiment\": " << (v.valid ? "negative" : "neutral") << "\n"
        << "\"Line_matching\": " << (v.line_matching ? "yes" : "no") << "\n"
        << "\"Suggested score\": " << v.score << "\n"
        << "\"Score reason\": " << Json(v.reason).dump() << "\n"
        << "}\n";
  }
  out << "```\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Curation prompts

std::size_t word_count(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return trim(s);
}

std::string answer_rewrite(const std::string& user) {
  const std::string block =
      strip_yaml_fence(prompts::section(user, prompts::kReviewBegin, prompts::kReviewEnd));
  Issue issue;
  try {
    issue = parse_issue_block(block);
  } catch (const Error&) {
    return "The review could not be read.\n";
  }
  const std::string comment = one_line(issue.rationale);
  const std::string lc = lower(comment);
  const bool bad = lc.rfind("nit", 0) == 0 || lc.find("http") != std::string::npos || word_count(comment) < 4;
  std::ostringstream out;
  out << "Hypothesis: in " << issue.file << " at line " << issue.line << " the reviewer points at "
      << (issue.function ? *issue.function : std::string("the changed code")) << ".\n\n{\n<conclusion>\n";
  if (bad) {
    out << "   review_quality: bad\n   review_rewrite: null\n";
  } else {
    std::string rewrite = comment;
    if (!rewrite.empty()) rewrite[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(rewrite[0])));
    out << "   review_quality: good\n   review_rewrite: " << rewrite << "\n";
  }
  out << "</conclusion>\n}\n";
  return out.str();
}

std::string json_value_after(const std::string& text, std::string_view key) {
  const std::string needle = "\"" + std::string(key) + "\":";
  const auto pos = text.find(needle);
  if (pos == std::string::npos) return {};
  auto eol = text.find('\n', pos);
  if (eol == std::string::npos) eol = text.size();
  const std::string raw = trim(std::string_view(text).substr(pos + needle.size(), eol - pos - needle.size()));
  try {
    const Json j = Json::parse(raw);
    if (j.is_string()) return j.get<std::string>();
  } catch (const Json::exception&) {
  }
  return raw;
}

std::string answer_critique(const std::string& user) {
  const std::string sentiment = json_value_after(user, "human sentiment");
  const std::string comment = one_line(json_value_after(user, "human feedback comments"));
  const bool positive = sentiment.rfind("positive", 0) == 0;
  const std::size_t words = word_count(comment);
  int quality = 0;
  if (words >= 15) {
    quality = 5;
  } else if (words >= 8) {
    quality = 4;
  } else if (words >= 4) {
    quality = 3;
  } else if (words >= 1) {
    quality = 1;
  }
  std::string critique;
  if (quality >= 3) {
    critique = comment;
  } else {
    critique = positive ? "The suggestion identifies a real problem in the changed code and is worth addressing."
                        : "The suggestion does not point to a real problem in the changed code.";
  }
  std::ostringstream out;
  out << "The developer sentiment is " << (positive ? "positive" : "negative") << ".\n\n"
      << "```yaml\n\"human_feedback_quality\": " << quality << "\n\"critique\": " << Json(critique).dump()
      << "\n```\n";
  return out.str();
}

std::string answer_equivalence(const std::string& user) {
  const std::string a = prompts::section(user, prompts::kRationaleA, prompts::kRationaleB);
  const std::string b = prompts::section(user, prompts::kRationaleB, prompts::kRationaleEnd);
  return token_jaccard(a, b) >= 0.5 ? "equivalent\n" : "different\n";
}

bool has_line(const std::string& text, std::string_view marker) {
  std::size_t pos = 0;
  while ((pos = text.find(marker, pos)) != std::string::npos) {
    const bool start = pos == 0 || text[pos - 1] == '\n';
    const std::size_t after = pos + marker.size();
    if (start && (after == text.size() || text[after] == '\n')) return true;
    pos = after;
  }
  return false;
}

std::uint64_t next_random(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stand-in for sampling noise: each finding survives with probability 4/5,
// and half the samples add one copy of a finding cited past the end of its
// file, which the judge then scores 0.
std::vector<Issue> sampled_variant(std::vector<Issue> issues, const std::vector<NumberedFile>& files,
                                   std::uint64_t seed) {
  std::uint64_t state = seed;
  std::vector<Issue> out;
  for (auto& issue : issues) {
    if (next_random(state) % 5 != 0) out.push_back(issue);
  }
  if (!issues.empty() && next_random(state) % 2 == 0) {
    Issue decoy = issues[next_random(state) % issues.size()];
    std::int64_t last = 0;
    for (const auto& f : files) {
      if (f.path != decoy.file) continue;
      for (const auto& l : f.lines) last = std::max(last, l.number);
    }
    decoy.line = last + 1 + static_cast<std::int64_t>(next_random(state) % 5);
    out.push_back(std::move(decoy));
  }
  return out;
}

}  // namespace

std::vector<Issue> heuristic_issues(const std::vector<NumberedFile>& files) {
  std::vector<Found> found;
  for (const auto& file : files) {
    const std::string lang = language_for_path(file.path);
    if (lang.empty()) continue;
    const auto spans = function_spans(file, lang);
    documentation_and_length(file, lang, spans, found);
    division(file, lang, spans, found);
  }
  dedupe(files, found);
  std::stable_sort(found.begin(), found.end(), [](const Found& a, const Found& b) {
    return std::tie(a.issue.file, a.issue.line, a.rule) < std::tie(b.issue.file, b.issue.line, b.rule);
  });
  std::vector<Issue> issues;
  issues.reserve(found.size());
  for (auto& f : found) issues.push_back(std::move(f.issue));
  return issues;
}

std::string heuristic_review(const Diff& diff) {
  std::string out;
  for (const auto& issue : heuristic_issues(numbered_view(diff))) {
    out += serialize_issue(issue);
    out += '\n';
  }
  return out;
}

Completion HeuristicBackend::complete(const ChatRequest& req) {
  const std::string& user = req.user;
  std::string text;
  if (has_line(user, prompts::kCollectorDiffBegin)) {
    const auto files =
        parse_numbered(prompts::section(user, prompts::kCollectorDiffBegin, prompts::kCollectorDiffEnd));
    auto issues = heuristic_issues(files);
    if (req.temperature > 0.0 && req.sample_seed) issues = sampled_variant(std::move(issues), files, *req.sample_seed);
    for (const auto& issue : issues) {
      text += serialize_issue(issue);
      text += '\n';
    }
  } else if (has_line(user, prompts::kSuggestionsBegin)) {
    text = answer_judge(user, req.system == prompts::validator_system());
  } else if (has_line(user, prompts::kReviewBegin)) {
    text = answer_rewrite(user);
  } else if (has_line(user, prompts::kFeedbackDiffBegin)) {
    text = answer_critique(user);
  } else if (has_line(user, prompts::kRationaleA)) {
    text = answer_equivalence(user);
  } else {
    throw GatewayError(ErrorKind::gateway_status, backend_id_, "prompt not recognised by the offline reviewer");
  }
  return {text, backend_id_};
}

}  // namespace cqs
