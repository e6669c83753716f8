#include "cqs/core_model.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <sstream>

#include "cqs/error.hpp"

namespace cqs {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::invalid_tag: return "invalid-tag";
    case ErrorKind::parse: return "parse";
    case ErrorKind::diff_parse: return "diff-parse";
    case ErrorKind::unknown_file: return "unknown-file";
    case ErrorKind::unknown_backend: return "unknown-backend";
    case ErrorKind::gateway_timeout: return "timeout";
    case ErrorKind::gateway_transport: return "transport";
    case ErrorKind::gateway_status: return "non-success-status";
    case ErrorKind::retries_exhausted: return "retries-exhausted";
    case ErrorKind::malformed_verdict: return "malformed-verdict";
    case ErrorKind::unscored_review: return "unscored-review";
    case ErrorKind::contract: return "contract";
    case ErrorKind::io: return "io";
    case ErrorKind::not_found: return "not-found";
  }
  return "unknown";
}

const std::array<CanonicalTagInfo, kCanonicalTagCount>& canonical_tags() {
  static const std::array<CanonicalTagInfo, kCanonicalTagCount> kTags{{
      {CanonicalTag::DedupeLogic, "DedupeLogic",
       "Deduplicate logic into shared functions except for logging."},
      {CanonicalTag::DictionaryKeyExistenceCheck, "DictionaryKeyExistenceCheck",
       "Check for dictionary key existence before accessing it."},
      {CanonicalTag::UseConstant, "UseConstant",
       "Use constants instead of literals, unless it's a constant definition."},
      {CanonicalTag::RenamingVariable, "RenamingVariable",
       "Variable names should be pronounceable, easily readable, and reveal intent."},
      {CanonicalTag::DomainSpecificName, "DomainSpecificName",
       "Use solution domain names, computer science (CS) terms, algorithm names, pattern names, "
       "math terms. When there is no name from the solution domain then prefer problem domain "
       "names."},
      {CanonicalTag::BreakdownLongFunction, "BreakdownLongFunction",
       "Break down long functions into smaller, more focused functions. Only include this issue "
       "if the length of the current function is longer than 50 lines."},
      {CanonicalTag::ExtractMethod, "ExtractMethod",
       "When we have a block of code that can be extracted into a separate method, we should do "
       "so."},
      {CanonicalTag::ResourceLeak, "ResourceLeak",
       "A resource handle (e.g., file, socket, connection) is not properly wrapped in a context "
       "manager or try-with-resources construct or use a with statement in Python."},
      {CanonicalTag::Documentation, "Documentation",
       "Docstring should match the code, and be added for each major unit. Pay extra attention "
       "to different types of docstrings."},
      {CanonicalTag::DivisionByZero, "DivisionByZero",
       "When performing division operations, ensure that the divisor is checked to be non-zero "
       "before proceeding with the calculation."},
      {CanonicalTag::Typo, "Typo", "A typo is detected in the code."},
      {CanonicalTag::RenamingFunction, "RenamingFunction",
       "Function names should be pronounceable, easily readable, and reveal intent."},
  }};
  return kTags;
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

IssueTag IssueTag::custom(std::string name) {
  std::string t = trim(name);
  if (t.empty()) throw Error(ErrorKind::invalid_tag, "issue tag is empty");
  if (t.find_first_of("\r\n") != std::string::npos) {
    throw Error(ErrorKind::invalid_tag, "issue tag contains a newline");
  }
  for (const auto& info : canonical_tags()) {
    if (info.name == t) return info.tag;
  }
  return IssueTag(std::move(t));
}

std::optional<CanonicalTag> IssueTag::canonical() const {
  if (const auto* c = std::get_if<CanonicalTag>(&value_)) return *c;
  return std::nullopt;
}

std::string_view IssueTag::name() const {
  if (const auto* c = std::get_if<CanonicalTag>(&value_)) {
    return canonical_tags()[static_cast<std::size_t>(*c)].name;
  }
  return std::get<std::string>(value_);
}

IssueTag canonical_tag(std::string_view s) {
  return IssueTag::custom(std::string(s));
}

void validate_issue(const Issue& issue) {
  if (issue.line < 1) throw Error(ErrorKind::parse, "issue line must be >= 1");
  if (trim(issue.file).empty()) throw Error(ErrorKind::parse, "issue file is empty");
  if (trim(issue.rationale).empty()) throw Error(ErrorKind::parse, "issue rationale is empty");
  if (issue.function && issue.function->empty()) {
    throw Error(ErrorKind::parse, "issue function is present but empty");
  }
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string canonical_key(std::string_view raw) {
  std::string k = lower(trim(raw));
  std::replace(k.begin(), k.end(), ' ', '_');
  if (k == "problematic_function") return "function";
  if (k == "relevant_file") return "file";
  return k;
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) {
    if (cur.back() == '\r') cur.pop_back();
    lines.push_back(std::move(cur));
  }
  return lines;
}

std::string strip_fences(std::string_view text) {
  std::string out;
  for (const auto& line : split_lines(text)) {
    if (starts_with(trim(line), "```")) continue;
    out += line;
    out += '\n';
  }
  return out;
}

// Index one past the closing quote of the string starting at `open`, or npos.
std::size_t closing_quote(std::string_view s, std::size_t open) {
  for (std::size_t i = open + 1; i < s.size(); ++i) {
    if (s[i] == '\\') {
      ++i;
    } else if (s[i] == '"') {
      return i + 1;
    }
  }
  return std::string_view::npos;
}

Json decode_quoted(const std::string& quoted) {
  try {
    return Json::parse(quoted);
  } catch (const Json::exception&) {
    return quoted.size() >= 2 ? quoted.substr(1, quoted.size() - 2) : std::string{};
  }
}

Json scalar_from_bare(std::string v) {
  v = trim(v);
  if (!v.empty() && v.back() == ',') v = trim(v.substr(0, v.size() - 1));
  if (v == "null" || v == "NULL" || v == "~") return nullptr;
  if (!v.empty() && (std::isdigit(static_cast<unsigned char>(v[0])) || v[0] == '-')) {
    try {
      std::size_t used = 0;
      long long n = std::stoll(v, &used);
      if (used == v.size()) return n;
    } catch (const std::exception&) {
    }
  }
  if (v.size() >= 2 && v.front() == '\'' && v.back() == '\'') return v.substr(1, v.size() - 2);
  return v;
}

const std::regex& key_line_regex() {
  static const std::regex re(R"re(^\s*(?:-\s+)?"?([A-Za-z_][A-Za-z_ ]*?)"?\s*:\s?(.*)$)re");
  return re;
}

// Line-oriented fallback for YAML-ish or not-quite-JSON blocks.
std::map<std::string, Json> parse_key_values(std::string_view text) {
  std::map<std::string, Json> kv;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = trim(lines[i]);
    if (line.empty() || line == "{" || line == "}" || line == "}," || line == "---") continue;
    if (line.front() == '{') line = trim(line.substr(1));
    std::smatch m;
    if (!std::regex_match(line, m, key_line_regex())) continue;
    std::string key = canonical_key(m[1].str());
    std::string value = trim(m[2].str());
    if (!value.empty() && value.back() == '}' && value.find('"') == std::string::npos) {
      value = trim(value.substr(0, value.size() - 1));
    }
    Json parsed;
    if (!value.empty() && value.front() == '"') {
      std::string acc = value;
      std::size_t close = closing_quote(acc, 0);
      // Values wrapped across lines are rejoined with a single space.
      while (close == std::string::npos && i + 1 < lines.size()) {
        acc += ' ';
        acc += trim(lines[++i]);
        close = closing_quote(acc, 0);
      }
      if (close == std::string::npos) {
        parsed = acc.substr(1);
      } else {
        parsed = decode_quoted(acc.substr(0, close));
      }
    } else {
      parsed = scalar_from_bare(value);
    }
    kv.emplace(std::move(key), std::move(parsed));
  }
  return kv;
}

std::map<std::string, Json> block_fields(std::string_view text) {
  const std::string body = trim(strip_fences(text));
  if (!body.empty() && body.front() == '{') {
    try {
      Json j = Json::parse(body);
      if (j.is_object()) {
        std::map<std::string, Json> kv;
        for (auto it = j.begin(); it != j.end(); ++it) kv.emplace(canonical_key(it.key()), it.value());
        return kv;
      }
    } catch (const Json::exception&) {
    }
  }
  return parse_key_values(body);
}

std::int64_t parse_line_value(const Json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_string()) {
    const std::string s = trim(v.get<std::string>());
    if (!s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
      try {
        return std::stoll(s);
      } catch (const std::exception&) {
      }
    }
  }
  throw Error(ErrorKind::parse, "issue block has a non-numeric line: " + v.dump());
}

std::string string_value(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return {};
  return v.dump();
}

}  // namespace

Issue parse_issue_block(std::string_view text) {
  const auto kv = block_fields(text);
  auto require = [&](const char* key) -> const Json& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw Error(ErrorKind::parse, std::string("issue block is missing key '") + key + "'");
    }
    return it->second;
  };

  Issue issue;
  issue.file = string_value(require("file"));
  issue.line = parse_line_value(require("line"));
  issue.rationale = string_value(require("rationale"));
  issue.tag = canonical_tag(string_value(require("tag")));
  if (auto it = kv.find("function"); it != kv.end()) {
    std::string fn = trim(string_value(it->second));
    if (!fn.empty() && fn != "NULL" && fn != "null") issue.function = std::move(fn);
  }
  validate_issue(issue);
  return issue;
}

namespace {

std::string render_block(const Issue& issue, bool titlecase) {
  auto key = [&](std::string_view k) {
    std::string s(k);
    if (titlecase) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return "\"" + s + "\"";
  };
  std::ostringstream os;
  os << "{\n";
  os << "  " << key("function") << ": " << Json(issue.function.value_or("NULL")).dump() << ",\n";
  os << "  " << key("rationale") << ": " << Json(issue.rationale).dump() << ",\n";
  os << "  " << key("file") << ": " << Json(issue.file).dump() << ",\n";
  os << "  " << key("line") << ": " << issue.line << ",\n";
  os << "  " << key("tag") << ": " << Json(std::string(issue.tag.name())).dump() << "\n";
  os << "}";
  return os.str();
}

}  // namespace

std::string serialize_issue(const Issue& issue) { return render_block(issue, false); }

std::string serialize_issue_titlecase(const Issue& issue) { return render_block(issue, true); }

namespace {

bool has_issue_key(std::string_view paragraph) {
  static const std::regex re(
      R"re(^\s*(?:-\s+)?"?(function|problematic_function|rationale|file|relevant_file|line|tag)"?\s*:)re",
      std::regex::icase);
  for (const auto& line : split_lines(paragraph)) {
    if (std::regex_search(line, re)) return true;
  }
  return false;
}

std::vector<std::string> brace_groups(std::string_view s) {
  std::vector<std::string> groups;
  int depth = 0;
  bool in_string = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"' && depth > 0) {
      in_string = true;
    } else if (c == '{') {
      if (depth++ == 0) start = i;
    } else if (c == '}' && depth > 0) {
      if (--depth == 0) groups.emplace_back(s.substr(start, i - start + 1));
    }
  }
  // An unterminated group is still a (malformed) block.
  if (depth > 0) groups.emplace_back(s.substr(start));
  return groups;
}

}  // namespace

std::vector<std::string> split_blocks(std::string_view response) {
  const std::string body = trim(strip_fences(response));
  if (body.empty()) return {};

  if (body.front() == '[' || body.front() == '{') {
    try {
      Json j = Json::parse(body);
      std::vector<std::string> out;
      if (j.is_array()) {
        for (const auto& el : j) out.push_back(el.dump());
        return out;
      }
      if (j.is_object()) return {j.dump()};
    } catch (const Json::exception&) {
    }
  }

  if (body.find('{') != std::string::npos) return brace_groups(body);

  // YAML-ish: paragraphs split on blank lines, `---`, or list-item starts.
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (has_issue_key(cur)) out.push_back(cur);
    cur.clear();
  };
  static const std::regex item_start(R"(^-\s+\w+\s*:)");
  for (const auto& line : split_lines(body)) {
    const std::string t = trim(line);
    if (t.empty() || t == "---") {
      flush();
      continue;
    }
    if (std::regex_search(line, item_start)) flush();
    cur += line;
    cur += '\n';
  }
  flush();
  return out;
}

IssueBlocks parse_issue_blocks(std::string_view response) {
  IssueBlocks out;
  for (const auto& block : split_blocks(response)) {
    try {
      out.issues.push_back(parse_issue_block(block));
    } catch (const Error&) {
      ++out.warnings;
    }
  }
  return out;
}

Json to_json(const Issue& issue) {
  Json j;
  j["function"] = issue.function ? Json(*issue.function) : Json(nullptr);
  j["rationale"] = issue.rationale;
  j["file"] = issue.file;
  j["line"] = issue.line;
  j["tag"] = std::string(issue.tag.name());
  return j;
}

Issue issue_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::parse, "issue must be a JSON object");
  // Same key handling as the block parser.
  return parse_issue_block(j.dump());
}

Json to_json(const Review& review) {
  Json j;
  j["diff_id"] = review.diff_id;
  j["provenance"] = {{"backend_id", review.provenance.backend_id},
                     {"temperature", review.provenance.temperature},
                     {"sample_index", review.provenance.sample_index}};
  Json issues = Json::array();
  for (const auto& i : review.issues) issues.push_back(to_json(i));
  j["issues"] = std::move(issues);
  j["warnings"] = review.warnings;
  return j;
}

Review review_from_json(const Json& j) {
  try {
    Review r;
    r.diff_id = j.at("diff_id").get<std::string>();
    if (j.contains("provenance")) {
      const auto& p = j.at("provenance");
      r.provenance.backend_id = p.value("backend_id", std::string{});
      r.provenance.temperature = p.value("temperature", 0.0);
      r.provenance.sample_index = p.value("sample_index", 0);
    }
    for (const auto& i : j.at("issues")) r.issues.push_back(issue_from_json(i));
    r.warnings = j.value("warnings", 0);
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::parse, std::string("bad review JSON: ") + e.what());
  }
}

Json to_json(const DiffMeta& meta) {
  Json j;
  j["title"] = meta.title;
  j["summary"] = meta.summary;
  j["author_is_bot"] = meta.author_is_bot;
  j["is_test_only"] = meta.is_test_only;
  j["human_comment_count"] = meta.human_comment_count;
  j["languages"] = meta.languages;
  return j;
}

DiffMeta meta_from_json(const Json& j) {
  try {
    DiffMeta m;
    if (j.is_null()) return m;
    m.title = j.value("title", std::string{});
    m.summary = j.value("summary", std::string{});
    m.author_is_bot = j.value("author_is_bot", false);
    m.is_test_only = j.value("is_test_only", false);
    m.human_comment_count = j.value("human_comment_count", 0);
    if (m.human_comment_count < 0) {
      throw Error(ErrorKind::parse, "human_comment_count must be >= 0");
    }
    if (j.contains("languages")) m.languages = j.at("languages").get<std::vector<std::string>>();
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::parse, std::string("bad diff meta JSON: ") + e.what());
  }
}

}  // namespace cqs
