#include <gtest/gtest.h>

#include "cqs/collector.hpp"
#include "cqs/judge.hpp"
#include "cqs/prompts.hpp"
#include "support.hpp"

using namespace cqs;
using cqs_test::data_dir;
using cqs_test::read_file;

namespace {

struct Fixture {
  std::string numbered;
  DiffMeta meta;
  std::vector<Issue> issues;
  std::string comment;
};

Fixture load() {
  Fixture f;
  const auto dir = data_dir() / "golden/prompts";
  f.numbered = read_file(dir / "numbered.txt");
  const Json j = Json::parse(read_file(dir / "fixture.json"));
  f.meta.title = j["title"];
  f.meta.summary = j["summary"];
  for (const auto& i : j["issues"]) f.issues.push_back(issue_from_json(i));
  f.comment = j["comment"];
  return f;
}

std::string golden(const char* name) { return read_file(data_dir() / "golden/prompts" / name); }

}  // namespace

TEST(PromptGolden, Collector) {
  const Fixture f = load();
  EXPECT_EQ(prompts::collector(f.numbered, f.meta, default_tags()), golden("collector.txt"));
}

TEST(PromptGolden, RewriteHumanReview) {
  const Fixture f = load();
  EXPECT_EQ(prompts::rewrite_human_review(f.numbered, f.issues[0]), golden("rewrite_human_review.txt"));
}

TEST(PromptGolden, FeedbackCritique) {
  const Fixture f = load();
  EXPECT_EQ(prompts::feedback_critique(f.numbered, f.issues[0], false, f.comment), golden("feedback_critique.txt"));
}

TEST(PromptGolden, JudgeScoring) {
  const Fixture f = load();
  EXPECT_EQ(prompts::judge_scoring(f.numbered, f.issues), golden("judge_scoring.txt"));
}

TEST(PromptGolden, ValidatorSystem) { EXPECT_EQ(prompts::validator_system(), golden("validator_system.txt")); }

TEST(CollectorPrompt, EmptySummaryLineStays) {
  const Fixture f = load();
  DiffMeta m = f.meta;
  m.summary.clear();
  const std::string p = prompts::collector(f.numbered, m, default_tags());
  EXPECT_NE(p.find("\nSummary: \n"), std::string::npos);
}

TEST(CollectorPrompt, CustomTagAfterCanonicalMenu) {
  const Fixture f = load();
  auto tags = default_tags();
  tags.insert(tags.begin(), IssueTag::custom("HardcodedTimeout"));
  const std::string p = prompts::collector(f.numbered, f.meta, tags);
  const auto last = p.find("- RenamingFunction: ");
  const auto custom = p.find("- HardcodedTimeout\n");
  ASSERT_NE(custom, std::string::npos);
  EXPECT_GT(custom, last);
  EXPECT_NE(p.find("\n- HardcodedTimeout\n\nIn case none"), std::string::npos);
}

TEST(CollectorPrompt, BuiltFromDiffIsDeterministic) {
  const Diff d = parse_unified(read_file(data_dir() / "golden/diff/multi.patch"), {}, "m");
  const auto a = build_collector_prompt(d, d.meta, {});
  const auto b = build_collector_prompt(d, d.meta, default_tags());
  EXPECT_EQ(a.user, b.user);
  EXPECT_EQ(a.system, b.system);
  EXPECT_NE(a.user.find(render_numbered(d).substr(0, render_numbered(d).size() - 1)), std::string::npos);
}

TEST(JudgePrompt, EmptyAndSingleIssue) {
  const Fixture f = load();
  const std::string empty = prompts::judge_scoring(f.numbered, {});
  EXPECT_NE(empty.find("```yaml\n=== Suggestions (YAML Format) END ==="), std::string::npos);
  const std::string one = prompts::judge_scoring(f.numbered, {f.issues[0]});
  const std::string body = prompts::section(one, prompts::kSuggestionsBegin, prompts::kSuggestionsEnd);
  EXPECT_EQ(parse_issue_blocks(body).issues.size(), 1u);
}

TEST(JudgePrompt, ValidatorKindUsesSystemTemplate) {
  const Diff d = parse_unified(read_file(data_dir() / "golden/diff/multi.patch"), {}, "m");
  const auto req = build_judge_prompt(d, {}, JudgePrompt::validator);
  EXPECT_EQ(req.system, prompts::validator_system());
  EXPECT_NE(req.user.find(prompts::kSuggestionsBegin), std::string::npos);
}

TEST(CritiquePrompt, EmptyCommentRendersEmptySlot) {
  const Fixture f = load();
  const std::string p = prompts::feedback_critique(f.numbered, f.issues[0], true, "");
  EXPECT_NE(p.find("\"human sentiment\": \"positive (thumbs up)\"\n  \"human feedback comments\": \"\"\n"),
            std::string::npos);
}

TEST(Section, ExtractsBetweenWholeLineMarkers) {
  EXPECT_EQ(prompts::section("a\nBEGIN\nx\ny\nEND\nz", "BEGIN", "END"), "x\ny\n");
  EXPECT_EQ(prompts::section("no markers", "BEGIN", "END"), "");
  EXPECT_EQ(prompts::section("xBEGIN\nq\nEND", "BEGIN", "END"), "");
}
