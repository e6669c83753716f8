#include "cqs/diff.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

#include "cqs/code_text.hpp"
#include "cqs/error.hpp"

namespace cqs {

char marker_symbol(LineMarker m) {
  switch (m) {
    case LineMarker::added: return '+';
    case LineMarker::removed: return '-';
    case LineMarker::context: return ' ';
  }
  return ' ';
}

const FileDiff* Diff::find_file(std::string_view path) const {
  for (const auto& f : files) {
    if (f.path == path) return &f;
  }
  return nullptr;
}

namespace {

std::vector<std::string> split_keep_empty(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      if (pos < text.size()) lines.emplace_back(text.substr(pos));
      break;
    }
    lines.emplace_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  return lines;
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

std::string header_path(std::string_view line) {
  std::string p(line.substr(4));
  if (auto tab = p.find('\t'); tab != std::string::npos) p.resize(tab);
  p = trim(p);
  if (p == "/dev/null") return p;
  if (starts_with(p, "a/") || starts_with(p, "b/")) p = p.substr(2);
  return p;
}

std::string hunk_label(const std::string& file, std::size_t index, const std::string& header) {
  return "file '" + file + "' hunk #" + std::to_string(index + 1) + " (" + header + ")";
}

}  // namespace

Diff parse_unified(std::string_view text, DiffMeta meta, std::string diff_id) {
  static const std::regex hunk_re(R"(^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@.*$)");

  Diff diff;
  diff.diff_id = std::move(diff_id);
  diff.meta = std::move(meta);

  const auto lines = split_keep_empty(text);
  FileDiff* current = nullptr;
  std::set<std::string> seen_paths;

  std::size_t i = 0;
  while (i < lines.size()) {
    const std::string& line = lines[i];
    if (starts_with(line, "--- ") && i + 1 < lines.size() && starts_with(lines[i + 1], "+++ ")) {
      const std::string old_path = header_path(line);
      const std::string new_path = header_path(lines[i + 1]);
      const std::string path = new_path == "/dev/null" ? old_path : new_path;
      if (path.empty() || path == "/dev/null") {
        throw Error(ErrorKind::diff_parse, "file header without a usable path: " + line);
      }
      if (!seen_paths.insert(path).second) {
        throw Error(ErrorKind::diff_parse, "duplicate file in diff: " + path);
      }
      diff.files.push_back(FileDiff{path, {}});
      current = &diff.files.back();
      i += 2;
      continue;
    }
    if (!starts_with(line, "@@")) {
      ++i;  // git extended headers, "diff --git", "index", blank separators
      continue;
    }
    if (current == nullptr) {
      throw Error(ErrorKind::diff_parse, "hunk header before any file header: " + line);
    }
    std::smatch m;
    if (!std::regex_match(line, m, hunk_re)) {
      throw Error(ErrorKind::diff_parse,
                  "malformed hunk header in file '" + current->path + "': " + line);
    }
    Hunk h;
    try {
      h.old_start = std::stoll(m[1].str());
      h.old_len = m[2].matched ? std::stoll(m[2].str()) : 1;
      h.new_start = std::stoll(m[3].str());
      h.new_len = m[4].matched ? std::stoll(m[4].str()) : 1;
    } catch (const std::exception&) {
      throw Error(ErrorKind::diff_parse,
                  "malformed hunk header in file '" + current->path + "': " + line);
    }
    const std::string label = hunk_label(current->path, current->hunks.size(), line);

    std::int64_t old_seen = 0;
    std::int64_t new_seen = 0;
    auto mismatch = [&](const std::string& why) {
      return Error(ErrorKind::diff_parse,
                   "hunk length mismatch in " + label + ": declared -" +
                       std::to_string(h.old_start) + "," + std::to_string(h.old_len) + " +" +
                       std::to_string(h.new_start) + "," + std::to_string(h.new_len) + ", found " +
                       std::to_string(old_seen) + " old-side and " + std::to_string(new_seen) +
                       " new-side lines (" + why + ")");
    };

    std::size_t j = i + 1;
    while (old_seen < h.old_len || new_seen < h.new_len) {
      if (j >= lines.size()) throw mismatch("diff ended");
      const std::string& body = lines[j];
      if (!body.empty() && body[0] == '\\') {
        ++j;
        continue;
      }
      const char sym = body.empty() ? ' ' : body[0];
      const std::string content = body.empty() ? std::string{} : body.substr(1);
      DiffLine dl;
      dl.content = content;
      if (sym == ' ') {
        if (old_seen >= h.old_len || new_seen >= h.new_len) throw mismatch("extra context line");
        dl.marker = LineMarker::context;
        dl.old_no = h.old_start + old_seen++;
        dl.new_no = h.new_start + new_seen++;
      } else if (sym == '+') {
        if (new_seen >= h.new_len) throw mismatch("extra added line");
        dl.marker = LineMarker::added;
        dl.new_no = h.new_start + new_seen++;
      } else if (sym == '-') {
        if (old_seen >= h.old_len) throw mismatch("extra removed line");
        dl.marker = LineMarker::removed;
        dl.old_no = h.old_start + old_seen++;
      } else {
        throw mismatch("unexpected line '" + body + "'");
      }
      h.lines.push_back(std::move(dl));
      ++j;
    }
    while (j < lines.size() && !lines[j].empty() && lines[j][0] == '\\') ++j;
    if (j < lines.size()) {
      const std::string& next = lines[j];
      const bool next_file = starts_with(next, "--- ") && j + 1 < lines.size() &&
                             starts_with(lines[j + 1], "+++ ");
      if (!next_file && !next.empty() && (next[0] == '+' || next[0] == '-' || next[0] == ' ')) {
        throw mismatch("hunk body continues past its declared length");
      }
    }
    current->hunks.push_back(std::move(h));
    i = j;
  }

  if (diff.files.empty()) throw Error(ErrorKind::diff_parse, "no files");
  return diff;
}

void check_hunks(const Diff& diff) {
  if (diff.files.empty()) throw Error(ErrorKind::contract, "diff has no files");
  std::set<std::string> paths;
  for (const auto& f : diff.files) {
    if (!paths.insert(f.path).second) throw Error(ErrorKind::contract, "duplicate path " + f.path);
    for (const auto& h : f.hunks) {
      std::int64_t old_n = 0;
      std::int64_t new_n = 0;
      for (const auto& l : h.lines) {
        const bool has_old = l.old_no.has_value();
        const bool has_new = l.new_no.has_value();
        switch (l.marker) {
          case LineMarker::added:
            if (has_old || !has_new || *l.new_no != h.new_start + new_n) {
              throw Error(ErrorKind::contract, "bad added-line numbering in " + f.path);
            }
            ++new_n;
            break;
          case LineMarker::removed:
            if (!has_old || has_new || *l.old_no != h.old_start + old_n) {
              throw Error(ErrorKind::contract, "bad removed-line numbering in " + f.path);
            }
            ++old_n;
            break;
          case LineMarker::context:
            if (!has_old || !has_new || *l.old_no != h.old_start + old_n ||
                *l.new_no != h.new_start + new_n) {
              throw Error(ErrorKind::contract, "bad context-line numbering in " + f.path);
            }
            ++old_n;
            ++new_n;
            break;
        }
      }
      if (old_n != h.old_len || new_n != h.new_len) {
        throw Error(ErrorKind::contract, "hunk length bookkeeping broken in " + f.path);
      }
    }
  }
}

std::string render_numbered(const Diff& diff) {
  std::string out;
  for (const auto& f : diff.files) {
    out += f.path;
    out += '\n';
    for (const auto& h : f.hunks) {
      for (const auto& l : h.lines) {
        const std::int64_t n = l.marker == LineMarker::removed ? *l.old_no : *l.new_no;
        out += std::to_string(n);
        out += marker_symbol(l.marker);
        out += ' ';
        out += l.content;
        out += '\n';
      }
    }
  }
  return out;
}

std::string render_unified(const Diff& diff) {
  std::ostringstream os;
  for (const auto& f : diff.files) {
    os << "--- a/" << f.path << "\n+++ b/" << f.path << "\n";
    for (const auto& h : f.hunks) {
      os << "@@ -" << h.old_start << "," << h.old_len << " +" << h.new_start << "," << h.new_len
         << " @@\n";
      for (const auto& l : h.lines) os << marker_symbol(l.marker) << l.content << "\n";
    }
  }
  return os.str();
}

std::optional<DiffLine> line_lookup(const Diff& diff, std::string_view file, std::int64_t line) {
  if (line < 1) throw Error(ErrorKind::invalid_argument, "line must be >= 1");
  const FileDiff* f = diff.find_file(file);
  if (f == nullptr) throw Error(ErrorKind::unknown_file, "file not in diff: " + std::string(file));
  for (const auto& h : f->hunks) {
    for (const auto& l : h.lines) {
      if (l.marker != LineMarker::removed && l.new_no == line) return l;
    }
  }
  return std::nullopt;
}

std::vector<NumberedFile> numbered_view(const Diff& diff) {
  std::vector<NumberedFile> out;
  for (const auto& f : diff.files) {
    NumberedFile nf{f.path, {}};
    for (const auto& h : f.hunks) {
      for (const auto& l : h.lines) {
        const std::int64_t n = l.marker == LineMarker::removed ? *l.old_no : *l.new_no;
        nf.lines.push_back({l.marker, n, l.content});
      }
    }
    out.push_back(std::move(nf));
  }
  return out;
}

std::vector<NumberedFile> parse_numbered(std::string_view rendered) {
  static const std::regex line_re(R"(^(\d+)([+\- ]) (.*)$)");
  std::vector<NumberedFile> out;
  for (const auto& raw : split_keep_empty(rendered)) {
    std::smatch m;
    if (std::regex_match(raw, m, line_re)) {
      if (out.empty()) out.push_back({"", {}});
      const char sym = m[2].str()[0];
      const LineMarker marker = sym == '+'   ? LineMarker::added
                                : sym == '-' ? LineMarker::removed
                                             : LineMarker::context;
      out.back().lines.push_back({marker, std::stoll(m[1].str()), m[3].str()});
    } else if (!trim(raw).empty()) {
      out.push_back({raw, {}});
    }
  }
  return out;
}

std::vector<std::vector<NumberedLine>> new_side_segments(const NumberedFile& file) {
  std::vector<std::vector<NumberedLine>> segs;
  for (const auto& l : file.lines) {
    if (l.marker == LineMarker::removed) continue;
    if (segs.empty() || segs.back().back().number + 1 != l.number) segs.emplace_back();
    segs.back().push_back(l);
  }
  return segs;
}

std::string language_for_path(std::string_view path) {
  const auto dot = path.rfind('.');
  if (dot == std::string_view::npos) return "";
  std::string ext(path.substr(dot + 1));
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == "py" || ext == "pyi") return "python";
  if (ext == "cpp" || ext == "cc" || ext == "cxx" || ext == "c" || ext == "h" || ext == "hpp" ||
      ext == "hh" || ext == "hxx") {
    return "cpp";
  }
  if (ext == "php") return "php";
  if (ext == "hack" || ext == "hck") return "hack";
  if (ext == "java") return "java";
  if (ext == "js" || ext == "jsx" || ext == "mjs" || ext == "cjs" || ext == "ts" || ext == "tsx") {
    return "javascript";
  }
  if (ext == "go") return "go";
  return "";
}

const std::vector<std::string>& supported_languages() {
  static const std::vector<std::string> kLangs{"python", "cpp",        "php", "hack",
                                               "java",   "javascript", "go"};
  return kLangs;
}

namespace {

int indent_width(std::string_view s) {
  int w = 0;
  for (char c : s) {
    if (c == ' ') {
      w += 1;
    } else if (c == '\t') {
      w += 4;
    } else {
      break;
    }
  }
  return w;
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

const std::set<std::string>& non_function_words() {
  static const std::set<std::string> kWords{
      "if",     "for",    "while",    "switch", "catch",  "return", "new",    "delete",
      "throw",  "case",   "else",     "do",     "sizeof", "goto",   "typeof", "await",
      "yield",  "import", "function", "using",  "typedef", "static_assert", "decltype",
      "co_return", "co_await", "elif", "with", "try", "defer", "go", "select", "super", "this"};
  return kWords;
}

struct HeaderMatch {
  std::string name;
  int indent = 0;
};

std::optional<HeaderMatch> match_header(std::string_view language, const std::string& line) {
  static const std::regex py(R"(^(\s*)(?:async\s+)?def\s+([A-Za-z_]\w*)\s*\()");
  static const std::regex go(R"(^(\s*)func\s+(?:\([^)]*\)\s*)?([A-Za-z_]\w*)\s*[\(\[])");
  static const std::regex php(
      R"(^(\s*)(?:(?:public|private|protected|static|abstract|final|async)\s+)*function\s+&?([A-Za-z_]\w*)\s*[\(<])");
  static const std::regex js_fn(
      R"(^(\s*)(?:export\s+)?(?:default\s+)?(?:async\s+)?function\s*\*?\s*([A-Za-z_$][\w$]*)\s*\()");
  static const std::regex js_arrow(
      R"(^(\s*)(?:export\s+)?(?:const|let|var)\s+([A-Za-z_$][\w$]*)\s*=\s*(?:async\s+)?(?:function\b|\([^)]*\)\s*=>|[A-Za-z_$][\w$]*\s*=>))");
  static const std::regex js_method(
      R"(^(\s*)(?:(?:static|async|get|set|public|private|protected)\s+)*([A-Za-z_$][\w$]*)\s*\([^)]*\)\s*\{\s*$)");
  static const std::regex java(
      R"(^(\s*)(?:(?:public|private|protected|static|final|abstract|synchronized|native|default)\s+)*(?:<[^>]+>\s+)?[\w<>\[\],.?]+(?:\s*<[^;=()]*>)?\s+([A-Za-z_]\w*)\s*\([^;]*$)");
  static const std::regex cpp(
      R"(^(\s*)(?:template\s*<[^;]*>\s*)?(?:(?:[\w:<>,*&~\[\]]+)\s+)+[*&]*((?:[A-Za-z_]\w*::)*~?[A-Za-z_]\w*)\s*\([^;]*$)");
  static const std::regex cpp_qualified(
      R"(^(\s*)((?:[A-Za-z_]\w*::)+~?[A-Za-z_]\w*)\s*\([^;]*$)");

  std::smatch m;
  auto accept = [&](const std::smatch& mm) -> std::optional<HeaderMatch> {
    std::string name = mm[2].str();
    const auto colon = name.rfind("::");
    const std::string last = colon == std::string::npos ? name : name.substr(colon + 2);
    if (non_function_words().count(last) != 0) return std::nullopt;
    return HeaderMatch{last, indent_width(mm[1].str())};
  };

  if (language == "python") {
    if (std::regex_search(line, m, py)) return accept(m);
    return std::nullopt;
  }
  if (language == "go") {
    if (std::regex_search(line, m, go)) return accept(m);
    return std::nullopt;
  }
  if (language == "php" || language == "hack") {
    if (std::regex_search(line, m, php)) return accept(m);
    return std::nullopt;
  }
  if (language == "javascript") {
    if (std::regex_search(line, m, js_fn) || std::regex_search(line, m, js_arrow) ||
        std::regex_search(line, m, js_method)) {
      return accept(m);
    }
    return std::nullopt;
  }
  if (language == "java" || language == "cpp") {
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed[0] == '#' || trimmed.find("<<") != std::string::npos ||
        trimmed.find('=') < trimmed.find('(')) {
      return std::nullopt;
    }
    const std::string first_word = trimmed.substr(0, trimmed.find_first_of(" \t("));
    if (non_function_words().count(first_word) != 0) return std::nullopt;
    const std::regex& re = language == "java" ? java : cpp;
    if (std::regex_search(line, m, re)) return accept(m);
    if (language == "cpp" && std::regex_search(line, m, cpp_qualified)) return accept(m);
  }
  return std::nullopt;
}

bool brace_language(std::string_view language) { return language != "python"; }

// Index of the last line belonging to the function whose header is at `h`,
// or npos when the header turns out to be a declaration.
std::size_t span_end(const std::vector<NumberedLine>& seg, std::size_t h, std::string_view language,
                     int header_indent) {
  if (!brace_language(language)) {
    // Skip the (possibly multi-line) signature.
    int parens = 0;
    std::size_t k = h;
    for (; k < seg.size(); ++k) {
      const std::string code = strip_code(seg[k].content, language);
      for (char c : code) {
        if (c == '(' || c == '[') ++parens;
        if (c == ')' || c == ']') --parens;
      }
      if (parens <= 0) break;
    }
    if (k >= seg.size()) return seg.size() - 1;
    std::size_t last = k;
    for (std::size_t n = k + 1; n < seg.size(); ++n) {
      if (is_blank(seg[n].content)) continue;
      if (indent_width(seg[n].content) <= header_indent) break;
      last = n;
    }
    return last;
  }

  int depth = 0;
  bool opened = false;
  for (std::size_t k = h; k < seg.size(); ++k) {
    const std::string code = strip_code(seg[k].content, language);
    for (char c : code) {
      if (c == '{') {
        ++depth;
        opened = true;
      } else if (c == '}') {
        --depth;
        if (opened && depth == 0) return k;
      } else if (c == ';' && !opened) {
        return std::string::npos;
      }
    }
    if (k > h && !opened) {
      // Arrow functions without braces and the like: single statement.
      if (code.find("=>") != std::string::npos) return k;
    }
  }
  if (!opened && language == "javascript") return h;
  if (!opened) return std::string::npos;
  // Unbalanced inside the hunk: stop at the last non-blank line.
  std::size_t last = seg.size() - 1;
  while (last > h && is_blank(seg[last].content)) --last;
  return last;
}

}  // namespace

std::vector<FunctionSpan> function_spans(const NumberedFile& file, std::string_view language) {
  std::vector<FunctionSpan> spans;
  const auto& langs = supported_languages();
  if (std::find(langs.begin(), langs.end(), language) == langs.end()) return spans;

  for (const auto& seg : new_side_segments(file)) {
    std::vector<std::pair<std::size_t, HeaderMatch>> headers;
    for (std::size_t k = 0; k < seg.size(); ++k) {
      if (is_comment_only(seg[k].content, language)) continue;
      if (auto hm = match_header(language, seg[k].content)) headers.emplace_back(k, *hm);
    }
    for (std::size_t hi = 0; hi < headers.size(); ++hi) {
      const auto& [k, hm] = headers[hi];
      std::size_t end = span_end(seg, k, language, hm.indent);
      if (end == std::string::npos) continue;
      // A later header at the same or lower indentation closes this one.
      for (std::size_t nj = hi + 1; nj < headers.size(); ++nj) {
        const auto& [nk, nhm] = headers[nj];
        if (nk > end) break;
        if (nhm.indent <= hm.indent) {
          end = nk - 1;
          while (end > k && is_blank(seg[end].content)) --end;
          break;
        }
      }
      while (end > k && is_blank(seg[end].content)) --end;
      FunctionSpan s;
      s.file = file.path;
      s.name = hm.name;
      s.start = seg[k].number;
      s.end = seg[end].number;
      s.length = s.end - s.start + 1;
      s.header_added = seg[k].marker == LineMarker::added;
      spans.push_back(std::move(s));
    }
  }
  return spans;
}

std::vector<FunctionSpan> changed_function_spans(const Diff& diff, std::string_view language) {
  std::vector<FunctionSpan> out;
  for (const auto& nf : numbered_view(diff)) {
    const std::string lang = language_for_path(nf.path);
    if (!lang.empty() && lang != language) continue;
    auto spans = function_spans(nf, language);
    out.insert(out.end(), spans.begin(), spans.end());
  }
  return out;
}

Json diff_record_json(const Diff& diff) {
  Json j;
  j["diff_id"] = diff.diff_id;
  j["unified"] = render_unified(diff);
  j["meta"] = to_json(diff.meta);
  return j;
}

Diff diff_from_record(const Json& j) {
  if (!j.is_object() || !j.contains("unified") || !j["unified"].is_string()) {
    throw Error(ErrorKind::parse, "diff record needs a string 'unified' field");
  }
  return parse_unified(j["unified"].get<std::string>(),
                       meta_from_json(j.contains("meta") ? j["meta"] : Json()),
                       j.value("diff_id", std::string{}));
}

}  // namespace cqs
