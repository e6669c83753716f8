#include "cqs/judge.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <regex>

#include "cqs/prompts.hpp"

namespace cqs {

std::string_view to_string(Sentiment s) {
  switch (s) {
    case Sentiment::positive: return "positive";
    case Sentiment::negative: return "negative";
    case Sentiment::neutral: return "neutral";
  }
  return "neutral";
}

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

Sentiment sentiment_from(std::string_view s) {
  const std::string v = lower(trim(s));
  if (v.rfind("positive", 0) == 0) return Sentiment::positive;
  if (v.rfind("negative", 0) == 0) return Sentiment::negative;
  return Sentiment::neutral;
}

bool yes(std::string_view s) {
  const std::string v = lower(trim(s));
  return v == "yes" || v == "true" || v == "y";
}

std::string normalise_key(std::string k) {
  k = lower(trim(k));
  for (auto& c : k) {
    if (c == ' ' || c == '-') c = '_';
  }
  return k;
}

std::string strip_fences(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    if (trim(line).rfind("```", 0) != 0) {
      out.append(line);
      out.push_back('\n');
    }
    pos = nl + 1;
  }
  return out;
}

// Top-level brace groups; quotes are respected so braces inside strings do
// not split records.
std::vector<std::string> brace_groups(const std::string& text) {
  std::vector<std::string> groups;
  int depth = 0;
  bool in_str = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_str) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_str = false;
      }
      continue;
    }
    if (c == '"') {
      in_str = true;
    } else if (c == '{') {
      if (depth++ == 0) start = i + 1;
    } else if (c == '}' && depth > 0) {
      if (--depth == 0) groups.push_back(text.substr(start, i - start));
    }
  }
  if (depth > 0) groups.push_back(text.substr(start));
  return groups;
}

std::vector<std::string> paragraphs(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!trim(cur).empty()) out.push_back(cur);
    cur.clear();
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    const std::string t = trim(line);
    if (t.empty() || t == "---") {
      flush();
      continue;
    }
    if (t.rfind("- ", 0) == 0) {
      flush();
      line = t.substr(2);
    }
    cur += line;
    cur += '\n';
  }
  flush();
  return out;
}

using Fields = std::map<std::string, std::string>;

// key: value lines; quoted values may span lines, unquoted continuation lines
// are joined with a space.
Fields read_fields(const std::string& record) {
  static const std::regex key_re(R"re(^\s*"?([A-Za-z_][A-Za-z0-9_ \-]*?)"?\s*:\s?(.*)$)re");
  Fields fields;
  std::string current;
  std::size_t pos = 0;
  while (pos < record.size()) {
    std::size_t nl = record.find('\n', pos);
    if (nl == std::string::npos) nl = record.size();
    const std::string line = record.substr(pos, nl - pos);
    pos = nl + 1;
    std::smatch m;
    if (std::regex_match(line, m, key_re)) {
      std::string key = normalise_key(m[1].str());
      std::string value = trim(m[2].str());
      if (!value.empty() && value.back() == ',') value.pop_back();
      if (!value.empty() && value.front() == '"') {
        // Pull in continuation lines until the string closes.
        while (true) {
          try {
            const Json j = Json::parse(value);
            if (j.is_string()) value = j.get<std::string>();
            break;
          } catch (const Json::exception&) {
          }
          if (pos >= record.size()) break;
          std::size_t nl2 = record.find('\n', pos);
          if (nl2 == std::string::npos) nl2 = record.size();
          value += " " + trim(record.substr(pos, nl2 - pos));
          if (!value.empty() && value.back() == ',') value.pop_back();
          pos = nl2 + 1;
        }
      }
      fields[key] = value;
      current = key;
    } else if (!current.empty() && !trim(line).empty()) {
      fields[current] += " " + trim(line);
    }
  }
  return fields;
}

const std::string* field(const Fields& f, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (auto it = f.find(n); it != f.end()) return &it->second;
  }
  return nullptr;
}

int parse_score(std::string raw, std::size_t index) {
  raw = trim(raw);
  if (raw.size() >= 2 && (raw.front() == '"' || raw.front() == '\'') && raw.back() == raw.front()) {
    raw = trim(raw.substr(1, raw.size() - 2));
  }
  static const std::regex int_re(R"(^[+-]?\d+$)");
  if (!std::regex_match(raw, int_re)) {
    throw Error(ErrorKind::malformed_verdict,
                "verdict at index " + std::to_string(index) + ": score '" + raw + "' is not an integer");
  }
  long long v = 0;
  try {
    v = std::stoll(raw);
  } catch (const std::exception&) {
    v = raw[0] == '-' ? -1 : 11;
  }
  if (v > 10) {
    throw Error(ErrorKind::malformed_verdict,
                "verdict at index " + std::to_string(index) + ": score " + raw + " is above 10");
  }
  return v < 0 ? 0 : static_cast<int>(v);
}

JudgeVerdict verdict_from_fields(const Fields& f, std::size_t index) {
  JudgeVerdict v;
  if (const auto* s = field(f, {"suggestion_content", "content", "suggestion"})) v.suggestion_content = *s;
  if (const auto* s = field(f, {"sentiment"})) v.sentiment = sentiment_from(*s);
  if (const auto* s = field(f, {"line_matching", "line_match"})) v.line_matching = yes(*s);
  if (const auto* s = field(f, {"score_reason", "reason"})) v.reason = *s;
  const auto* score = field(f, {"suggested_score", "score"});
  if (score == nullptr) {
    throw Error(ErrorKind::malformed_verdict, "verdict at index " + std::to_string(index) + ": missing score");
  }
  v.score = parse_score(*score, index);
  if (const auto* s = field(f, {"status"})) {
    v.valid = lower(trim(*s)).rfind("valid", 0) == 0;
  } else {
    v.valid = v.score > 0;
  }
  if (!v.valid) v.score = 0;
  return v;
}

bool looks_like_verdict(const Fields& f) { return field(f, {"suggested_score", "score", "status"}) != nullptr; }

std::optional<std::vector<Fields>> json_records(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception&) {
    return std::nullopt;
  }
  if (j.is_object()) j = Json::array({j});
  if (!j.is_array()) return std::nullopt;
  std::vector<Fields> out;
  for (const auto& item : j) {
    if (!item.is_object()) return std::nullopt;
    Fields f;
    for (const auto& [k, val] : item.items()) {
      f[normalise_key(k)] = val.is_string() ? val.get<std::string>() : val.dump();
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

Json to_json(const JudgeVerdict& v) {
  return Json{{"suggestion_content", v.suggestion_content},
              {"status", v.valid ? "valid" : "invalid"},
              {"sentiment", std::string(to_string(v.sentiment))},
              {"line_matching", v.line_matching},
              {"score", v.score},
              {"reason", v.reason}};
}

JudgeVerdict verdict_from_json(const Json& j) {
  JudgeVerdict v;
  v.suggestion_content = j.value("suggestion_content", std::string{});
  v.valid = j.value("status", std::string{"invalid"}) == "valid";
  v.sentiment = sentiment_from(j.value("sentiment", std::string{"neutral"}));
  v.line_matching = j.value("line_matching", false);
  v.score = j.value("score", 0);
  v.reason = j.value("reason", std::string{});
  if (v.score < 0 || v.score > 10) throw Error(ErrorKind::malformed_verdict, "score out of range");
  return v;
}

ChatRequest build_judge_prompt(const Diff& diff, const std::vector<Issue>& issues, JudgePrompt kind) {
  ChatRequest req;
  const std::string numbered = render_numbered(diff);
  if (kind == JudgePrompt::validator) {
    req.system = prompts::validator_system();
    req.user = prompts::validator_user(numbered, issues);
  } else {
    req.system = std::string(prompts::kJudgeSystem);
    req.user = prompts::judge_scoring(numbered, issues);
  }
  return req;
}

std::vector<JudgeVerdict> parse_verdicts(std::string_view reply) {
  const std::string text = strip_fences(reply);
  if (trim(text).empty()) return {};
  std::vector<Fields> records;
  if (auto js = json_records(trim(text))) {
    records = std::move(*js);
  } else {
    auto groups = brace_groups(text);
    if (groups.empty()) groups = paragraphs(text);
    for (const auto& g : groups) {
      Fields f = read_fields(g);
      if (looks_like_verdict(f)) records.push_back(std::move(f));
    }
  }
  std::vector<JudgeVerdict> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) out.push_back(verdict_from_fields(records[i], i));
  return out;
}

std::vector<JudgeVerdict> judge(const Gateway& gateway, const Diff& diff, const Review& review,
                                const JudgeOptions& opts) {
  if (review.issues.empty()) return {};
  ChatRequest req = build_judge_prompt(diff, review.issues, opts.prompt);
  req.temperature = opts.temperature;
  req.max_tokens = opts.max_tokens;
  const std::size_t want = review.issues.size();
  auto verdicts = parse_verdicts(gateway.complete(req, opts.backend_id).text);
  if (verdicts.size() == want) return verdicts;

  const std::size_t got = verdicts.size();
  req.user += "\nYour previous reply contained " + std::to_string(got) + " verdicts for " +
              std::to_string(want) + " suggestions. Score every suggestion exactly once, in order.\n";
  verdicts = parse_verdicts(gateway.complete(req, opts.backend_id).text);
  if (verdicts.size() == want) return verdicts;
  throw Error(ErrorKind::unscored_review,
              "judge returned " + std::to_string(verdicts.size()) + " verdicts for " + std::to_string(want) +
                  " issues of review '" + review.diff_id + "' after one re-ask");
}

}  // namespace cqs
