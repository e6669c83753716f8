#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cqs/diff.hpp"
#include "cqs/gateway.hpp"

namespace cqs {

struct Eligibility {
  bool eligible = false;
  std::vector<std::string> reasons;  // few-comments, bot-author, test-only
};

// Eligible iff more than one human review comment, a human author and not
// a test-only change.
Eligibility diff_eligibility(const DiffMeta& meta);

struct CurationOptions {
  std::string backend_id = "heuristic";
  double temperature = 0.0;
  int critique_keep_threshold = 3;
};

// A diff with its human review comments, already tagged. The comment text is
// each issue's rationale.
struct HumanReviewRecord {
  Diff diff;
  Review review;
};

Json to_json(const HumanReviewRecord& r);
HumanReviewRecord human_record_from_json(const Json& j);

enum class ReviewQuality { good, bad };

struct IssueRewrite {
  std::optional<ReviewQuality> quality;  // absent when the reply did not parse
  std::optional<std::string> rewrite;
  std::string error;
};

struct Conclusion {
  ReviewQuality quality = ReviewQuality::bad;
  std::optional<std::string> rewrite;
};

// Reads the <conclusion> block; throws Error(parse) when it is missing or
// names no quality.
Conclusion parse_conclusion(std::string_view reply);

std::vector<IssueRewrite> rewrite_human_review(const Gateway& gateway, const HumanReviewRecord& record,
                                               const CurationOptions& opts);

struct SftRow {
  std::string diff_id;
  std::string prompt;
  std::string target;
};

struct SftDataset {
  std::vector<SftRow> rows;
  int ineligible_diffs = 0;
  int omitted_diffs = 0;  // eligible, but every issue was bad or unparsed
  int kept_issues = 0;
  int dropped_issues = 0;
  int parse_errors = 0;
};

SftDataset curate_sft_dataset(const Gateway& gateway, const std::vector<HumanReviewRecord>& records,
                              const CurationOptions& opts);
Json to_json(const SftRow& row);
Json summary_json(const SftDataset& ds);

// Input row of critique curation; the service export emits exactly this.
struct CritiqueInput {
  std::string feedback_id;
  std::string review_id;
  std::string reviewer_id;
  std::string timestamp;
  Diff diff;
  int issue_index = 0;
  Issue issue;
  bool thumbs_up = false;
  std::string comment;
};

// Throws Error(parse) naming the first offending field.
void validate_critique_input(const Json& j);
Json to_json(const CritiqueInput& in);
CritiqueInput critique_input_from_json(const Json& j);

struct CritiqueSample {
  std::string diff_id;
  std::string feedback_id;
  Issue issue;
  bool thumbs_up = false;
  std::string critique;
  int quality = 0;
  bool kept = false;
};

Json to_json(const CritiqueSample& s);

struct CritiqueReply {
  int quality = 0;
  std::string critique;
};

// Reads human_feedback_quality (0..5) and critique; throws Error(parse).
CritiqueReply parse_critique_reply(std::string_view reply);

CritiqueSample rewrite_feedback_critique(const Gateway& gateway, const Diff& diff, const Issue& issue,
                                         bool thumbs_up, std::string_view comment,
                                         const CurationOptions& opts);

struct CritiqueDataset {
  std::vector<CritiqueSample> samples;  // kept and filtered, in input order
  int kept = 0;
  int filtered = 0;
  int errors = 0;
};

CritiqueDataset curate_critiques(const Gateway& gateway, const std::vector<CritiqueInput>& inputs,
                                 const CurationOptions& opts);
Json summary_json(const CritiqueDataset& ds);

}  // namespace cqs
