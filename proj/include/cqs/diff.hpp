#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cqs/core_model.hpp"

namespace cqs {

enum class LineMarker { added, removed, context };

char marker_symbol(LineMarker m);

struct DiffLine {
  LineMarker marker = LineMarker::context;
  std::optional<std::int64_t> old_no;
  std::optional<std::int64_t> new_no;
  std::string content;

  friend bool operator==(const DiffLine&, const DiffLine&) = default;
};

struct Hunk {
  std::int64_t old_start = 0;
  std::int64_t old_len = 0;
  std::int64_t new_start = 0;
  std::int64_t new_len = 0;
  std::vector<DiffLine> lines;

  friend bool operator==(const Hunk&, const Hunk&) = default;
};

struct FileDiff {
  std::string path;
  std::vector<Hunk> hunks;

  friend bool operator==(const FileDiff&, const FileDiff&) = default;
};

struct Diff {
  std::string diff_id;
  std::vector<FileDiff> files;
  DiffMeta meta;

  const FileDiff* find_file(std::string_view path) const;

  friend bool operator==(const Diff&, const Diff&) = default;
};

// Parses a unified diff. Git extended headers are skipped. Throws
// Error(diff_parse) for an empty diff ("no files"), a malformed `@@` header,
// or a hunk whose body disagrees with its declared lengths.
Diff parse_unified(std::string_view text, DiffMeta meta, std::string diff_id = "");

// Checks the hunk bookkeeping invariants; throws Error(contract) on failure.
void check_hunks(const Diff& diff);

// `<n><sym> <content>` per line, each file section headed by its path.
// Added and context lines carry new-file numbers, removed lines old-file.
std::string render_numbered(const Diff& diff);

// Added or context line with new_no == line. Throws Error(unknown_file) when
// the path is not part of the diff.
std::optional<DiffLine> line_lookup(const Diff& diff, std::string_view file, std::int64_t line);

// Inverse-ish view of render_numbered: enough structure for heuristics that
// only see prompt text.
struct NumberedLine {
  LineMarker marker = LineMarker::context;
  std::int64_t number = 0;
  std::string content;

  friend bool operator==(const NumberedLine&, const NumberedLine&) = default;
};

struct NumberedFile {
  std::string path;
  std::vector<NumberedLine> lines;

  friend bool operator==(const NumberedFile&, const NumberedFile&) = default;
};

std::vector<NumberedFile> numbered_view(const Diff& diff);
std::vector<NumberedFile> parse_numbered(std::string_view rendered);

// Added and context lines split into runs of consecutive new-file numbers.
std::vector<std::vector<NumberedLine>> new_side_segments(const NumberedFile& file);

// Language id for a path by extension ("" when unknown).
std::string language_for_path(std::string_view path);
const std::vector<std::string>& supported_languages();

struct FunctionSpan {
  std::string file;
  std::string name;
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::int64_t length = 0;
  bool header_added = false;

  friend bool operator==(const FunctionSpan&, const FunctionSpan&) = default;
};

std::vector<FunctionSpan> function_spans(const NumberedFile& file, std::string_view language);

// Best-effort spans of functions visible in the new side of the diff, for
// files in `language` (or with an unrecognised extension). Unknown language
// ids yield an empty list.
std::vector<FunctionSpan> changed_function_spans(const Diff& diff, std::string_view language);

// Standard unified text for a Diff; parse_unified(render_unified(d)) == d.
std::string render_unified(const Diff& diff);

// JSON carrier used by every on-disk format: {diff_id, unified, meta}.
Json diff_record_json(const Diff& diff);
Diff diff_from_record(const Json& j);

}  // namespace cqs
