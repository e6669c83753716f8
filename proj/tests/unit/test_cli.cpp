#include <gtest/gtest.h>

#include "cqs/pref_builder.hpp"
#include "support.hpp"

using namespace cqs;

namespace {

std::string q(const std::filesystem::path& p) { return cqs_test::shell_quote(p.string()); }

cqs_test::CommandResult run(const std::string& args) {
  return cqs_test::run_command(cqs_test::shell_quote(cqs_test::cli()) + " " + args + " 2>/dev/null");
}

const std::string kMeanPatch = cqs_test::new_file_patch(
    "stats.py", {"def mean(values):", "    total = sum(values)", "    count = len(values)", "    return total / count"});

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("bogus").exit_code, 2);
  EXPECT_EQ(run("review").exit_code, 2);
  EXPECT_EQ(run("review --diff /nonexistent/file.patch").exit_code, 2);
  EXPECT_EQ(run("pairs --scored x --delta 0 --out y").exit_code, 2);
  EXPECT_EQ(run("--help").exit_code, 0);
}

TEST(Cli, DomainErrorsExitOne) {
  cqs_test::TempDir dir;
  cqs_test::write_file(dir.path() / "bad.patch", "this is not a diff\n");
  EXPECT_EQ(run("review --diff " + q(dir.path() / "bad.patch")).exit_code, 1);
  cqs_test::write_file(dir.path() / "good.patch", kMeanPatch);
  EXPECT_EQ(run("review --diff " + q(dir.path() / "good.patch") + " --backend nowhere").exit_code, 1);
}

TEST(Cli, ReviewIsDeterministicAndKeyedByStem) {
  cqs_test::TempDir dir;
  const auto patch = dir.path() / "mean-helper.patch";
  cqs_test::write_file(patch, kMeanPatch);
  const auto first = run("review --diff " + q(patch));
  ASSERT_EQ(first.exit_code, 0);
  EXPECT_EQ(run("review --diff " + q(patch)).out, first.out);
  const Json j = Json::parse(first.out);
  EXPECT_EQ(j["diff_id"], "mean-helper");
  ASSERT_EQ(j["issues"].size(), 2u);
  EXPECT_EQ(j["issues"][0]["tag"], "Documentation");
  EXPECT_EQ(j["issues"][1]["tag"], "DivisionByZero");
  EXPECT_EQ(j["issues"][1]["line"], 4);
  EXPECT_FALSE(j.contains("audit"));
  EXPECT_TRUE(Json::parse(run("review --debug --diff " + q(patch)).out).contains("audit"));
  const auto text = run("review --format text --diff " + q(patch));
  EXPECT_EQ(text.exit_code, 0);
  EXPECT_NE(text.out.find("DivisionByZero"), std::string::npos);
}

TEST(Cli, CollectJudgePairsPipeline) {
  cqs_test::TempDir dir;
  const auto patch = dir.path() / "mean.patch";
  cqs_test::write_file(patch, kMeanPatch);
  const auto samples = run("collect --diff " + q(patch) + " --n 10 --seed 7");
  ASSERT_EQ(samples.exit_code, 0);
  EXPECT_EQ(std::count(samples.out.begin(), samples.out.end(), '\n'), 10);
  cqs_test::write_file(dir.path() / "samples.jsonl", samples.out);
  const auto scored = dir.path() / "scored.jsonl";
  const auto verdicts = run("judge --diff " + q(patch) + " --review " + q(dir.path() / "samples.jsonl") +
                            " --scored-out " + q(scored));
  ASSERT_EQ(verdicts.exit_code, 0);
  EXPECT_FALSE(verdicts.out.empty());
  const auto out = dir.path() / "pairs.jsonl";
  const auto summary = run("pairs --scored " + q(scored) + " --out " + q(out));
  ASSERT_EQ(summary.exit_code, 0);
  const Json s = Json::parse(summary.out);
  const auto pairs = parse_dpo_jsonl(cqs_test::read_file(out));
  EXPECT_EQ(s["count"].get<std::size_t>(), pairs.size());
  EXPECT_GT(pairs.size(), 0u);
  for (const auto& p : pairs) EXPECT_GE(p.margin, 3);
  // Same seed, same bytes.
  EXPECT_EQ(run("collect --diff " + q(patch) + " --n 10 --seed 7").out, samples.out);
}

TEST(Cli, DpoCheck) {
  cqs_test::TempDir dir;
  const auto batch = dir.path() / "batch.jsonl";
  cqs_test::write_file(batch,
                       "{\"policy_chosen\":[-0.5,-0.5],\"ref_chosen\":[-2.0,-2.0],"
                       "\"policy_rejected\":[-1.0],\"ref_rejected\":[-1.0]}\n");
  const auto r = run("dpo-check --batch " + q(batch));
  ASSERT_EQ(r.exit_code, 0);
  const Json j = Json::parse(r.out);
  EXPECT_NEAR(j["mean_loss"].get<double>(), 0.5543552444685271235, 1e-9);
  EXPECT_EQ(j["gradient_check"], "ok");
  cqs_test::write_file(batch, "{\"policy_chosen\":[0.5],\"ref_chosen\":[-1],\"policy_rejected\":[-1],"
                              "\"ref_rejected\":[-1]}\n");
  EXPECT_EQ(run("dpo-check --batch " + q(batch)).exit_code, 1);
}
