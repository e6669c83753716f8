#include <gtest/gtest.h>

#include <random>

#include "cqs/eval.hpp"
#include "support.hpp"

using namespace cqs;

namespace {

Issue at(IssueTag tag, std::int64_t line, std::string rationale, std::string file = "a.py") {
  return Issue{tag, std::nullopt, std::move(rationale), std::move(file), line};
}

bool same_text(std::string_view a, std::string_view b) { return a == b; }

Diff tiny(const std::string& id = "d") {
  return cqs_test::diff_of(cqs_test::new_file_patch("a.py", {"x = 1", "y = x / 2"}), id);
}

}  // namespace

TEST(Matching, WorkedExample) {
  // Three predictions against four gold issues: two match.
  const std::vector<Issue> gold = {at(CanonicalTag::DivisionByZero, 10, "divisor may be zero"),
                                   at(CanonicalTag::Documentation, 3, "add a docstring"),
                                   at(CanonicalTag::Typo, 20, "typo in name"),
                                   at(CanonicalTag::ResourceLeak, 40, "file never closed")};
  const std::vector<Issue> pred = {at(CanonicalTag::DivisionByZero, 12, "divisor may be zero"),
                                   at(CanonicalTag::Documentation, 3, "add a docstring"),
                                   at(CanonicalTag::Typo, 30, "typo in name")};
  MatchConfig cfg;
  const auto m = match_issues(pred, gold, cfg, same_text);
  EXPECT_EQ(m, (std::vector<Match>{{0, 0}, {1, 1}}));
  const auto metrics = compute_metrics({{pred.size(), gold.size(), m.size()}});
  EXPECT_EQ(metrics.issues_found, 3u);
  ASSERT_TRUE(metrics.precision);
  EXPECT_EQ(*metrics.precision, 2.0 / 3.0);
  EXPECT_EQ(metrics.recall, 0.5);
}

TEST(Matching, EdgeConditions) {
  MatchConfig cfg;
  const auto g = at(CanonicalTag::DivisionByZero, 10, "r");
  EXPECT_TRUE(match_issues({at(CanonicalTag::DivisionByZero, 13, "r")}, {g}, cfg, same_text).size() == 1);
  EXPECT_TRUE(match_issues({at(CanonicalTag::DivisionByZero, 14, "r")}, {g}, cfg, same_text).empty());
  EXPECT_TRUE(match_issues({at(CanonicalTag::ResourceLeak, 10, "r")}, {g}, cfg, same_text).empty());
  EXPECT_TRUE(match_issues({at(IssueTag::custom("divisionbyzero"), 10, "r")}, {g}, cfg, same_text).empty());
  EXPECT_TRUE(match_issues({at(CanonicalTag::DivisionByZero, 10, "other")}, {g}, cfg, same_text).empty());
  EXPECT_TRUE(match_issues({at(CanonicalTag::DivisionByZero, 10, "r", "b.py")}, {g}, cfg, same_text).empty());
  cfg.require_file_match = false;
  EXPECT_EQ(match_issues({at(CanonicalTag::DivisionByZero, 10, "r", "b.py")}, {g}, cfg, same_text).size(), 1u);
  cfg.line_tolerance = -1;
  EXPECT_THROW(match_issues({}, {g}, cfg, same_text), Error);
}

TEST(Matching, OneToOne) {
  MatchConfig cfg;
  const auto g = at(CanonicalTag::Typo, 5, "r");
  const auto m = match_issues({g, g, g}, {g}, cfg, same_text);
  EXPECT_EQ(m.size(), 1u);
  EXPECT_EQ(match_issues({g}, {g, g}, cfg, same_text).size(), 1u);
}

TEST(Matching, OptimalBeatsGreedyOrder) {
  // Greedy gives pred 0 to gold 0 and leaves gold 1 without a partner.
  const std::vector<Issue> gold = {at(CanonicalTag::Typo, 5, "r"), at(CanonicalTag::Typo, 9, "r")};
  const std::vector<Issue> pred = {at(CanonicalTag::Typo, 7, "r"), at(CanonicalTag::Typo, 3, "r")};
  MatchConfig cfg;
  EXPECT_EQ(match_issues(pred, gold, cfg, same_text).size(), 1u);
  cfg.optimal = true;
  EXPECT_EQ(match_issues(pred, gold, cfg, same_text), (std::vector<Match>{{1, 0}, {0, 1}}));
}

TEST(Matching, RandomBoundsAndOptimality) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> count(0, 6), line(1, 12), tag(0, 1), word(0, 1);
  const std::vector<IssueTag> tags = {CanonicalTag::Typo, CanonicalTag::DedupeLogic};
  const std::vector<std::string> words = {"a", "b"};
  for (int n = 0; n < 300; ++n) {
    std::vector<Issue> pred, gold;
    for (int i = count(rng); i > 0; --i) pred.push_back(at(tags[tag(rng)], line(rng), words[word(rng)]));
    for (int i = count(rng); i > 0; --i) gold.push_back(at(tags[tag(rng)], line(rng), words[word(rng)]));
    MatchConfig cfg;
    const auto greedy = match_issues(pred, gold, cfg, same_text);
    cfg.optimal = true;
    const auto best = match_issues(pred, gold, cfg, same_text);
    EXPECT_LE(greedy.size(), best.size());
    EXPECT_LE(best.size(), std::min(pred.size(), gold.size()));
    std::set<std::size_t> ps, gs;
    for (const auto& m : best) {
      EXPECT_TRUE(ps.insert(m.pred).second);
      EXPECT_TRUE(gs.insert(m.gold).second);
      EXPECT_EQ(pred[m.pred].tag, gold[m.gold].tag);
      EXPECT_LE(std::llabs(pred[m.pred].line - gold[m.gold].line), 3);
    }
  }
}

TEST(Metrics, NoPredictionsLeavesPrecisionAbsent) {
  const auto m = compute_metrics({{0, 4, 0}});
  EXPECT_FALSE(m.precision);
  EXPECT_EQ(m.recall, 0.0);
  const auto perfect = compute_metrics({{2, 2, 2}, {1, 1, 1}});
  EXPECT_EQ(*perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_THROW(compute_metrics({}), Error);
  EXPECT_THROW(compute_metrics({{3, 0, 0}}), Error);
  EXPECT_THROW(compute_metrics({{1, 1, 2}}), Error);
}

TEST(Comparators, TokenOverlapAndBackend) {
  MatchConfig cfg;
  const auto overlap = make_comparator(cfg, nullptr);
  EXPECT_TRUE(overlap("the divisor may be zero", "divisor may be zero"));
  EXPECT_FALSE(overlap("the divisor may be zero", "add a docstring"));
  cfg.semantic_comparator = "heuristic";
  EXPECT_THROW(make_comparator(cfg, nullptr), Error);
  auto gw = make_offline_gateway();
  const auto llm = make_comparator(cfg, gw.get());
  EXPECT_TRUE(llm("the divisor may be zero", "divisor may be zero"));
  EXPECT_FALSE(llm("the divisor may be zero", "add a docstring"));

  auto odd = std::make_shared<ScriptedBackend>("odd");
  odd->set_default(std::string("perhaps"));
  Gateway g2;
  BackendConfig bc;
  bc.backend_id = "odd";
  bc.kind = BackendKind::scripted;
  g2.add(bc, odd);
  cfg.semantic_comparator = "odd";
  EXPECT_THROW(make_comparator(cfg, &g2)("a", "b"), Error);
}

TEST(RunEval, RecallFixtureRendersTwoDecimals) {
  std::vector<BenchmarkEntry> bench;
  for (int i = 0; i < 500; ++i) {
    bench.push_back({tiny("d" + std::to_string(i)), {at(CanonicalTag::DivisionByZero, 2, "divisor")}});
  }
  EvalSystem sys{"fixture", [](const Diff& d, int) {
                   const int k = std::stoi(d.diff_id.substr(1));
                   if (k < 391) return std::vector<Issue>{at(CanonicalTag::DivisionByZero, 2, "divisor")};
                   return std::vector<Issue>{};
                 }};
  const auto report = run_eval({sys}, bench, 1, {}, same_text);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_EQ(report.rows[0].recall.mean, 391.0 / 500.0);
  EXPECT_EQ(render_table(report),
            "| Method | # Issues Found | Precision (%) | Recall (%) |\n|---|---|---|---|\n"
            "| fixture | 391.00 | 100.00 | 78.20 |\n");
}

TEST(RunEval, SpreadAndFailures) {
  const std::vector<BenchmarkEntry> bench = {{tiny(), {at(CanonicalTag::Typo, 1, "t")}}};
  EvalSystem alternating{"alt", [](const Diff&, int run) {
                           if (run % 2 == 0) return std::vector<Issue>{at(CanonicalTag::Typo, 1, "t")};
                           return std::vector<Issue>{};
                         }};
  EvalSystem broken{"broken", [](const Diff&, int) -> std::vector<Issue> {
                      throw Error(ErrorKind::gateway_transport, "down");
                    }};
  const auto report = run_eval({alternating, broken}, bench, 4, {}, same_text);
  const auto& alt = report.rows[0];
  EXPECT_EQ(alt.issues_found.mean, 0.5);
  EXPECT_EQ(alt.issues_found.spread, 0.5);
  EXPECT_EQ(alt.recall.mean, 0.5);
  ASSERT_TRUE(alt.precision);
  EXPECT_EQ(alt.precision->mean, 1.0);
  EXPECT_EQ(alt.precision->spread, 0.0);
  EXPECT_TRUE(report.rows[1].failed);
  const std::string table = render_table(report);
  EXPECT_NE(table.find("| alt | 0.50 ± 0.50 | 100.00 ± 0.00 | 50.00 ± 50.00 |"), std::string::npos) << table;
  EXPECT_NE(table.find("| broken | failed | failed | failed |"), std::string::npos);
  const Json j = to_json(report);
  EXPECT_EQ(j["rows"][0]["per_run"].size(), 4u);
  EXPECT_EQ(j["rows"][1]["failed"], true);
  EXPECT_THROW(run_eval({alternating}, bench, 0, {}, same_text), Error);
  EXPECT_THROW(run_eval({alternating}, {}, 1, {}, same_text), Error);
}

TEST(RunEval, HeuristicPipelineHasZeroSpread) {
  auto gw = make_offline_gateway();
  const Diff d = cqs_test::diff_of(
      cqs_test::new_file_patch("stats.py", {"def mean(values):", "    total = sum(values)",
                                            "    count = len(values)", "    return total / count"}),
      "mean");
  const std::vector<BenchmarkEntry> bench = {
      {d, {at(CanonicalTag::DivisionByZero, 4, "count may be zero", "stats.py")}}};
  PipelineConfig pc;
  const auto report = run_eval({{"heuristic", make_pipeline(*gw, pc)}}, bench, kDefaultEvalRuns,
                               {}, make_comparator({}, nullptr));
  const auto& row = report.rows.at(0);
  ASSERT_FALSE(row.failed) << row.error;
  EXPECT_EQ(row.per_run.size(), 10u);
  EXPECT_EQ(row.issues_found.spread, 0.0);
  EXPECT_EQ(row.recall.spread, 0.0);
  ASSERT_TRUE(row.precision);
  EXPECT_EQ(row.precision->spread, 0.0);
  EXPECT_GT(row.issues_found.mean, 0.0);
}

TEST(JudgeAccuracy, ScriptedLabels) {
  auto backend = std::make_shared<ScriptedBackend>("j");
  std::vector<LabeledIssue> labeled;
  const Diff d = tiny();
  for (int i = 0; i < 100; ++i) {
    const std::string rationale = "marker-" + std::to_string(i) + "-end";
    const bool up = i % 2 == 0;
    // 62 predictions agree with the label.
    const bool correct = i < 62;
    const int score = (up == correct) ? 8 : 2;
    backend->add_for_substring(rationale, std::string("{\n\"Status\": valid\n\"Suggested score\": " +
                                                      std::to_string(score) + "\n}\n"));
    labeled.push_back({d, at(CanonicalTag::Typo, 1, rationale), up});
  }
  Gateway gw;
  BackendConfig bc;
  bc.backend_id = "j";
  bc.kind = BackendKind::scripted;
  gw.add(bc, backend);
  JudgeOptions jo;
  jo.backend_id = "j";
  const auto acc = judge_accuracy(gw, jo, labeled);
  EXPECT_EQ(acc.correct, 62u);
  EXPECT_EQ(acc.total, 100u);
  EXPECT_EQ(acc.accuracy, 0.62);
  EXPECT_EQ(acc.up, 50u);
  EXPECT_EQ(acc.down, 50u);
  // Nothing reaches 11, so only the thumbs-down labels are right.
  EXPECT_EQ(judge_accuracy(gw, jo, labeled, 11).accuracy, 0.5);
  EXPECT_THROW(judge_accuracy(gw, jo, {}), Error);
}

TEST(Benchmark, JsonlRoundTrip) {
  const BenchmarkEntry e{tiny(), {at(CanonicalTag::Typo, 1, "t")}};
  const auto back = parse_benchmark_jsonl(to_json(e).dump() + "\n\n" + to_json(e).dump() + "\n");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].consensus_issues, e.consensus_issues);
  Json empty = to_json(e);
  empty["consensus_issues"] = Json::array();
  EXPECT_THROW(benchmark_entry_from_json(empty), Error);
}
