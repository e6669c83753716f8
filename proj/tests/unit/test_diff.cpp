#include <gtest/gtest.h>

#include <random>

#include "cqs/diff.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cqs;
using cqs_test::data_dir;
using cqs_test::read_file;

TEST(ParseUnified, ThreeContextOneAdded) {
  const Diff d = parse_unified("--- a/f.py\n+++ b/f.py\n@@ -1,3 +1,4 @@\n a\n b\n+new\n c\n", {}, "x");
  ASSERT_EQ(d.files.size(), 1u);
  const auto& lines = d.files[0].hunks.at(0).lines;
  ASSERT_EQ(lines.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(lines[i].new_no, static_cast<std::int64_t>(i + 1));
  EXPECT_EQ(lines[2].marker, LineMarker::added);
  EXPECT_FALSE(lines[2].old_no.has_value());
  EXPECT_EQ(lines[3].old_no, 3);
}

TEST(ParseUnified, EmptyInputIsNoFiles) {
  try {
    parse_unified("", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::diff_parse);
    EXPECT_STREQ(e.what(), "no files");
  }
}

TEST(ParseUnified, LengthMismatchNamesFileAndHunk) {
  try {
    parse_unified("--- a/f.py\n+++ b/f.py\n@@ -1,3 +1,5 @@\n a\n+b\n c\n", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::diff_parse);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("f.py"), std::string::npos);
    EXPECT_NE(msg.find("hunk #1"), std::string::npos);
  }
}

TEST(ParseUnified, BodyLongerThanDeclared) {
  EXPECT_THROW(parse_unified("--- a/f.py\n+++ b/f.py\n@@ -1,1 +1,1 @@\n a\n+b\n", {}), Error);
}

TEST(ParseUnified, MalformedHunkHeader) {
  try {
    parse_unified("--- a/f.py\n+++ b/f.py\n@@ -x +1 @@\n+a\n", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::diff_parse);
    EXPECT_NE(std::string(e.what()).find("malformed hunk header"), std::string::npos);
  }
}

TEST(ParseUnified, DuplicatePathRejected) {
  EXPECT_THROW(parse_unified("--- a/f\n+++ b/f\n@@ -1 +1 @@\n-a\n+b\n--- a/f\n+++ b/f\n@@ -5 +5 @@\n-a\n+b\n", {}),
               Error);
}

TEST(RenderNumbered, SymbolConvention) {
  const Diff d = parse_unified("--- a/f.py\n+++ b/f.py\n@@ -5,1 +12,2 @@\n def f():\n+x = 1\n", {});
  EXPECT_EQ(render_numbered(d), "f.py\n12  def f():\n13+ x = 1\n");
}

TEST(RenderNumbered, MultiFileGolden) {
  const Diff d = parse_unified(read_file(data_dir() / "golden/diff/multi.patch"), {}, "multi");
  EXPECT_EQ(render_numbered(d), read_file(data_dir() / "golden/diff/multi.numbered"));
}

TEST(RenderNumbered, CrlfGolden) {
  const Diff d = parse_unified(read_file(data_dir() / "golden/diff/crlf.patch"), {}, "crlf");
  EXPECT_EQ(render_numbered(d), read_file(data_dir() / "golden/diff/crlf.numbered"));
}

TEST(RenderNumbered, RepeatedRendersAreIdentical) {
  const Diff d = parse_unified(read_file(data_dir() / "golden/diff/multi.patch"), {}, "multi");
  EXPECT_EQ(render_numbered(d), render_numbered(d));
}

TEST(LineLookup, AddedContextRemovedAndUnknownFile) {
  const Diff d = parse_unified("--- a/f.py\n+++ b/f.py\n@@ -15,3 +15,2 @@\n a\n-b\n+c\n-d\n", {});
  // old 15..17 = a b d ; new 15..16 = a c
  const auto c = line_lookup(d, "f.py", 16);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->content, "c");
  EXPECT_TRUE(line_lookup(d, "f.py", 15));
  EXPECT_FALSE(line_lookup(d, "f.py", 17));  // only an old-side number
  try {
    line_lookup(d, "g.py", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unknown_file);
  }
}

TEST(FunctionSpans, SixtyLinePythonFunction) {
  std::vector<std::string> lines = {"def big(x):"};
  for (int i = 0; i < 59; ++i) lines.push_back("    x = x + " + std::to_string(i));
  const Diff d = cqs_test::diff_of(cqs_test::new_file_patch("m.py", lines));
  const auto spans = changed_function_spans(d, "python");
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].name, "big");
  EXPECT_EQ(spans[0].start, 1);
  EXPECT_EQ(spans[0].length, 60);
  EXPECT_TRUE(spans[0].header_added);
}

TEST(FunctionSpans, AdjacentFunctionsDoNotOverlap) {
  const Diff d = cqs_test::diff_of(cqs_test::new_file_patch(
      "m.py", {"def a():", "    return 1", "", "def b():", "    y = 2", "    return y"}));
  const auto spans = changed_function_spans(d, "python");
  ASSERT_EQ(spans.size(), 2u);
  EXPECT_EQ(spans[0].name, "a");
  EXPECT_EQ(spans[1].name, "b");
  EXPECT_LT(spans[0].end, spans[1].start);
  EXPECT_EQ(spans[1].start, 4);
  EXPECT_EQ(spans[1].end, 6);
}

TEST(FunctionSpans, OtherLanguages) {
  const Diff cpp = cqs_test::diff_of(cqs_test::new_file_patch(
      "a.cc", {"int add(int a, int b) {", "  return a + b;", "}"}));
  auto spans = changed_function_spans(cpp, "cpp");
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].name, "add");
  EXPECT_EQ(spans[0].length, 3);
  const Diff go = cqs_test::diff_of(cqs_test::new_file_patch("a.go", {"func Run(x int) int {", "\treturn x", "}"}));
  spans = changed_function_spans(go, "go");
  ASSERT_EQ(spans.size(), 1u);
  EXPECT_EQ(spans[0].name, "Run");
}

TEST(FunctionSpans, NoHeadersOrUnknownLanguage) {
  const Diff d = cqs_test::diff_of(cqs_test::new_file_patch("m.py", {"x = 1", "y = 2"}));
  EXPECT_TRUE(changed_function_spans(d, "python").empty());
  EXPECT_TRUE(changed_function_spans(d, "cobol").empty());
}

TEST(DiffRecord, JsonRoundTrip) {
  DiffMeta meta{"t", "s", false, true, 2, {"python"}};
  const Diff d = parse_unified(read_file(data_dir() / "golden/diff/multi.patch"), meta, "multi");
  EXPECT_EQ(diff_from_record(diff_record_json(d)), d);
}

TEST(GeneratedDiffs, RoundTripNumberingAndLookup) {
  std::mt19937_64 rng(2024);
  for (int n = 0; n < 200; ++n) {
    const auto g = cqs_test::generate_diff(rng);
    const Diff d = parse_unified(g.text, {}, "g");
    ASSERT_NO_THROW(check_hunks(d));
    ASSERT_EQ(d.files.size(), g.paths.size());
    for (std::size_t f = 0; f < g.paths.size(); ++f) {
      ASSERT_EQ(d.files[f].path, g.paths[f]);
      std::vector<DiffLine> flat;
      for (const auto& h : d.files[f].hunks) flat.insert(flat.end(), h.lines.begin(), h.lines.end());
      ASSERT_EQ(flat.size(), g.lines[f].size());
      for (std::size_t k = 0; k < flat.size(); ++k) {
        const auto& e = g.lines[f][k];
        EXPECT_EQ(marker_symbol(flat[k].marker), e.sym);
        EXPECT_EQ(flat[k].old_no.value_or(0), e.old_no);
        EXPECT_EQ(flat[k].new_no.value_or(0), e.new_no);
        EXPECT_EQ(flat[k].content, e.content);
        if (e.sym != '-') {
          const auto hit = line_lookup(d, g.paths[f], e.new_no);
          ASSERT_TRUE(hit);
          EXPECT_EQ(hit->content, e.content);
        }
      }
    }
    EXPECT_EQ(parse_unified(render_unified(d), {}, "g"), d);
  }
}
