#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cqs/collector.hpp"
#include "cqs/diff.hpp"
#include "cqs/gateway.hpp"
#include "cqs/judge.hpp"
#include "cqs/validator.hpp"

namespace cqs {

struct BenchmarkEntry {
  Diff diff;
  std::vector<Issue> consensus_issues;
};

Json to_json(const BenchmarkEntry& e);
BenchmarkEntry benchmark_entry_from_json(const Json& j);
std::vector<BenchmarkEntry> parse_benchmark_jsonl(std::string_view text);

inline constexpr std::string_view kTokenOverlapComparator = "token-overlap";

struct MatchConfig {
  int line_tolerance = 3;
  bool require_file_match = true;
  // kTokenOverlapComparator, or a gateway backend id asked with the
  // equivalence prompt.
  std::string semantic_comparator = std::string(kTokenOverlapComparator);
  double overlap_threshold = 0.5;
  bool optimal = false;  // maximum matching instead of greedy gold order
};

using RationaleComparator = std::function<bool(std::string_view a, std::string_view b)>;

RationaleComparator make_comparator(const MatchConfig& cfg, const Gateway* gateway);

struct Match {
  std::size_t pred = 0;
  std::size_t gold = 0;

  friend bool operator==(const Match&, const Match&) = default;
};

// One-to-one matching. An edge needs byte-equal tags, equal files (when
// required), lines within tolerance and an "equivalent" comparator verdict.
std::vector<Match> match_issues(const std::vector<Issue>& pred, const std::vector<Issue>& gold,
                                const MatchConfig& cfg, const RationaleComparator& same);

struct MatchCounts {
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t matched = 0;
};

struct Metrics {
  std::size_t issues_found = 0;
  std::optional<double> precision;  // absent when nothing was predicted
  double recall = 0.0;
};

Metrics compute_metrics(const std::vector<MatchCounts>& per_entry);

// Produces predictions for a diff; `run` selects fresh sampling seeds.
using EvalPipeline = std::function<std::vector<Issue>(const Diff& diff, int run)>;

struct EvalSystem {
  std::string method;
  EvalPipeline pipeline;
};

struct PipelineConfig {
  CollectOptions collect;
  JudgeOptions judge;
  FilterConfig filter;
  bool validate = true;
  std::uint64_t seed = 0;
};

// collect (seeded per run) then, optionally, validate.
EvalPipeline make_pipeline(const Gateway& gateway, const PipelineConfig& cfg);

struct Stat {
  double mean = 0.0;
  double spread = 0.0;  // population standard deviation over runs
};

struct EvalRow {
  std::string method;
  int runs = 0;
  bool failed = false;
  std::string error;
  Stat issues_found;
  std::optional<Stat> precision;  // fraction; absent when no run predicted anything
  Stat recall;
  std::vector<Metrics> per_run;
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

inline constexpr int kDefaultEvalRuns = 10;

EvalReport run_eval(const std::vector<EvalSystem>& systems, const std::vector<BenchmarkEntry>& benchmark,
                    int runs, const MatchConfig& match_cfg, const RationaleComparator& same);

Json to_json(const EvalReport& report);
// Method | # Issues Found | Precision (%) | Recall (%), two decimals.
std::string render_table(const EvalReport& report);

struct LabeledIssue {
  Diff diff;
  Issue issue;
  bool thumbs_up = false;
};

LabeledIssue labeled_issue_from_json(const Json& j);

struct JudgeAccuracy {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t up = 0;
  std::size_t down = 0;
};

inline constexpr int kDefaultAccuracyThreshold = 5;

// Predicts thumbs-up iff the judge score reaches the threshold.
JudgeAccuracy judge_accuracy(const Gateway& gateway, const JudgeOptions& opts,
                             const std::vector<LabeledIssue>& labeled,
                             int threshold = kDefaultAccuracyThreshold);

}  // namespace cqs
