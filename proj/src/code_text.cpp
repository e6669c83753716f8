#include "cqs/code_text.hpp"

#include <cctype>
#include <regex>
#include <set>

namespace cqs {
namespace {

bool hash_comments(std::string_view language) {
  return language == "python" || language == "php" || language == "hack";
}

bool slash_comments(std::string_view language) { return language != "python"; }

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '$';
}

std::string regex_escape(std::string_view s) {
  static const std::string special = R"(\^$.|?*+()[]{}/)";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string strip_code(std::string_view line, std::string_view language) {
  std::string out;
  out.reserve(line.size());
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (hash_comments(language) && c == '#') break;
    if (slash_comments(language) && c == '/' && i + 1 < line.size()) {
      if (line[i + 1] == '/') break;
      if (line[i + 1] == '*') {
        const auto close = line.find("*/", i + 2);
        if (close == std::string_view::npos) break;
        i = close + 2;
        out += ' ';
        continue;
      }
    }
    const bool backtick = c == '`' && (language == "javascript" || language == "go");
    if (c == '"' || c == '\'' || backtick) {
      const bool triple = language == "python" && line.substr(i, 3) == std::string(3, c);
      const std::size_t open_len = triple ? 3 : 1;
      std::size_t j = i + open_len;
      bool closed = false;
      while (j < line.size()) {
        if (line[j] == '\\') {
          j += 2;
          continue;
        }
        if (triple ? line.substr(j, 3) == std::string(3, c) : line[j] == c) {
          j += open_len;
          closed = true;
          break;
        }
        ++j;
      }
      out += "\"\"";
      if (!closed) break;
      i = j;
      continue;
    }
    out += c;
    ++i;
  }
  return out;
}

bool is_comment_only(std::string_view line, std::string_view language) {
  const std::string t = trim(line);
  if (t.empty()) return false;
  if (hash_comments(language) && t[0] == '#') return true;
  if (slash_comments(language)) {
    if (t.rfind("//", 0) == 0 || t.rfind("/*", 0) == 0 || t.rfind("*/", 0) == 0) return true;
    if (t[0] == '*' && (t.size() == 1 || t[1] == ' ' || t[1] == '/')) return true;
  }
  if (language == "python" && (t.rfind("\"\"\"", 0) == 0 || t.rfind("'''", 0) == 0)) return true;
  return false;
}

std::vector<std::string> nonliteral_divisors(std::string_view line, std::string_view language) {
  std::vector<std::string> out;
  const std::string code = strip_code(line, language);
  const std::string t = trim(code);
  if (language == "cpp" && !t.empty() && t[0] == '#') return out;

  for (std::size_t i = 0; i < code.size(); ++i) {
    const char c = code[i];
    if (c != '/' && c != '%') continue;
    // `"..." % args` is string formatting, not modulo.
    if (c == '%') {
      std::size_t p = i;
      while (p > 0 && code[p - 1] == ' ') --p;
      if (p >= 2 && code[p - 1] == '"' && code[p - 2] == '"') continue;
    }
    std::size_t j = i + 1;
    if (c == '/' && j < code.size() && code[j] == '/' && language == "python") ++j;
    if (j < code.size() && code[j] == '=') ++j;
    while (j < code.size() && (code[j] == ' ' || code[j] == '(' || code[j] == '-' || code[j] == '+')) {
      ++j;
    }
    if (j >= code.size()) continue;
    const char d = code[j];
    if (std::isdigit(static_cast<unsigned char>(d)) != 0 ||
        (d == '.' && j + 1 < code.size() && std::isdigit(static_cast<unsigned char>(code[j + 1])) != 0)) {
      i = j;
      continue;
    }
    if (!is_ident_char(d)) continue;
    std::size_t k = j;
    while (k < code.size() && (is_ident_char(code[k]) || code[k] == '.' ||
                               (code[k] == '-' && k + 1 < code.size() && code[k + 1] == '>') ||
                               (code[k] == '>' && k > 0 && code[k - 1] == '-') ||
                               (code[k] == ':' && k + 1 < code.size() && code[k + 1] == ':') ||
                               (code[k] == ':' && k > 0 && code[k - 1] == ':'))) {
      ++k;
    }
    // A call such as len(xs) is one divisor expression.
    if (k < code.size() && code[k] == '(') {
      int depth = 0;
      std::size_t e = k;
      for (; e < code.size(); ++e) {
        if (code[e] == '(') ++depth;
        if (code[e] == ')' && --depth == 0) break;
      }
      if (e < code.size()) k = e + 1;
    }
    out.push_back(code.substr(j, k - j));
    i = k > 0 ? k - 1 : k;
  }
  return out;
}

bool guards_against_zero(std::string_view line, std::string_view divisor,
                         std::string_view language) {
  if (divisor.empty()) return false;
  const std::string code = strip_code(line, language);
  const std::string d = regex_escape(divisor);
  const std::string lead = is_ident_char(divisor.front()) ? R"((?:^|[^\w$.]))" : "";
  const std::string tail = R"((?![\w$]))";
  const std::vector<std::string> patterns{
      lead + d + tail + R"(\s*(?:===?|!==?|>=?|<=?)\s*0(?:\.0*)?(?![\w.]))",
      R"((?:^|[^\w.])0(?:\.0*)?\s*(?:===?|!==?|<=?|>=?)\s*)" + d + tail,
      R"(\bif\s*\(?\s*(?:not\s+|!\s*)?)" + d + tail,
      R"(\bassert\b.*)" + d + tail,
      lead + d + tail + R"(\s*\?)",
      lead + d + tail + R"(\s*(?:and\b|&&))",
  };
  for (const auto& p : patterns) {
    if (std::regex_search(code, std::regex(p))) return true;
  }
  return false;
}

namespace {

bool is_decorator_like(std::string_view line, std::string_view language) {
  const std::string t = trim(line);
  if (t.empty()) return false;
  if (t[0] == '@') return language == "python" || language == "java" || language == "javascript";
  if (language == "cpp" && t.rfind("template", 0) == 0) return true;
  if ((language == "php" || language == "hack") && t.rfind("<<", 0) == 0) return true;
  return false;
}

bool starts_docstring(std::string_view line, std::string_view language) {
  std::string t = trim(line);
  if (t.empty()) return false;
  if (is_comment_only(t, language)) return true;
  if (language == "python") {
    std::size_t p = 0;
    while (p < t.size() && p < 2 && std::isalpha(static_cast<unsigned char>(t[p])) != 0) ++p;
    return p < t.size() && (t[p] == '"' || t[p] == '\'');
  }
  return false;
}

}  // namespace

bool span_has_docstring(const NumberedFile& file, const FunctionSpan& span,
                        std::string_view language) {
  for (const auto& seg : new_side_segments(file)) {
    std::size_t h = seg.size();
    for (std::size_t k = 0; k < seg.size(); ++k) {
      if (seg[k].number == span.start) {
        h = k;
        break;
      }
    }
    if (h == seg.size()) continue;

    // Comment run directly above the header (decorators skipped).
    std::size_t above = h;
    while (above > 0 && is_decorator_like(seg[above - 1].content, language)) --above;
    if (above > 0 && is_comment_only(seg[above - 1].content, language)) return true;

    std::size_t body = h;
    if (language == "python") {
      int parens = 0;
      for (; body < seg.size(); ++body) {
        for (char c : strip_code(seg[body].content, language)) {
          if (c == '(' || c == '[') ++parens;
          if (c == ')' || c == ']') --parens;
        }
        if (parens <= 0) break;
      }
    } else {
      for (; body < seg.size(); ++body) {
        const std::string code = strip_code(seg[body].content, language);
        const auto brace = code.find('{');
        if (brace != std::string::npos) {
          const std::string raw(seg[body].content);
          const auto raw_brace = raw.find('{');
          if (raw_brace != std::string::npos && is_comment_only(raw.substr(raw_brace + 1), language)) {
            return true;
          }
          break;
        }
      }
    }
    for (std::size_t k = body + 1; k < seg.size() && seg[k].number <= span.end; ++k) {
      if (trim(seg[k].content).empty()) continue;
      return starts_docstring(seg[k].content, language);
    }
    return false;
  }
  return false;
}

std::optional<FunctionSpan> find_span(const std::vector<FunctionSpan>& spans,
                                      const std::optional<std::string>& function, std::int64_t line) {
  auto contains = [&](const FunctionSpan& s) { return s.start <= line && line <= s.end; };
  if (function) {
    auto matches = [&](const FunctionSpan& s) {
      const std::string& f = *function;
      if (f == s.name) return true;
      auto ends_with = [&](std::string_view suffix) {
        return f.size() > suffix.size() && f.compare(f.size() - suffix.size(), suffix.size(), suffix) == 0;
      };
      return ends_with("::" + s.name) || ends_with("." + s.name) || ends_with("->" + s.name);
    };
    const FunctionSpan* best = nullptr;
    for (const auto& s : spans) {
      if (!matches(s)) continue;
      if (best == nullptr || (contains(s) && !contains(*best))) best = &s;
    }
    if (best != nullptr) return *best;
  }
  const FunctionSpan* inner = nullptr;
  for (const auto& s : spans) {
    if (contains(s) && (inner == nullptr || s.length < inner->length)) inner = &s;
  }
  if (inner != nullptr) return *inner;
  return std::nullopt;
}

std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double token_jaccard(std::string_view a, std::string_view b) {
  const auto ta = word_tokens(a);
  const auto tb = word_tokens(b);
  const std::set<std::string> sa(ta.begin(), ta.end());
  const std::set<std::string> sb(tb.begin(), tb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& t : sa) common += sb.count(t);
  return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

}  // namespace cqs
