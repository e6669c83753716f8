#pragma once

#include <map>
#include <string>
#include <vector>

#include "cqs/diff.hpp"

namespace cqs {

struct ScoredIssue {
  Issue issue;
  int score = 0;
  int source_sample = 0;

  friend bool operator==(const ScoredIssue&, const ScoredIssue&) = default;
};

struct PreferencePair {
  std::string diff_id;
  std::string input;  // numbered diff rendering
  Issue chosen;
  Issue rejected;
  IssueTag tag = CanonicalTag::Documentation;
  int chosen_score = 0;
  int rejected_score = 0;
  int margin = 0;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

inline constexpr int kDefaultDelta = 3;

// Issue-wise preference pairs over the union of all samples: every unordered
// pair of same-tag, content-distinct issues whose scores differ by at least
// delta, higher score chosen. Duplicate rows are collapsed; output is sorted
// by (tag, -margin, source position).
std::vector<PreferencePair> build_pairs(const Diff& x, const std::vector<std::vector<ScoredIssue>>& scored,
                                        int delta = kDefaultDelta);

// Judge-scored samples for one diff, the input of build_pairs.
struct ScoredRecord {
  Diff diff;
  std::vector<std::vector<ScoredIssue>> samples;
};

Json to_json(const ScoredRecord& r);
ScoredRecord scored_record_from_json(const Json& j);

struct DatasetFailure {
  std::string diff_id;
  std::string message;
};

struct PairDataset {
  std::vector<PreferencePair> pairs;
  std::map<std::string, int> per_tag;
  std::map<int, int> margin_histogram;
  std::vector<DatasetFailure> failures;
};

PairDataset build_dataset(const std::vector<ScoredRecord>& records, int delta = kDefaultDelta);
Json summary_json(const PairDataset& ds);

// One object per line: diff_id, prompt, chosen, rejected, tag, chosen_score,
// rejected_score, margin. chosen/rejected are serialized issue blocks.
std::string dpo_jsonl(const std::vector<PreferencePair>& pairs);
void emit_dpo_jsonl(const std::vector<PreferencePair>& pairs, const std::string& path);
std::vector<PreferencePair> parse_dpo_jsonl(std::string_view text);

}  // namespace cqs
