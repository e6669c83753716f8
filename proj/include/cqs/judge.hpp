#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cqs/diff.hpp"
#include "cqs/gateway.hpp"

namespace cqs {

enum class Sentiment { positive, negative, neutral };

std::string_view to_string(Sentiment s);

struct JudgeVerdict {
  std::string suggestion_content;
  bool valid = false;
  Sentiment sentiment = Sentiment::neutral;
  bool line_matching = false;
  int score = 0;  // 0..10; invalid verdicts are normalised to 0
  std::string reason;

  friend bool operator==(const JudgeVerdict&, const JudgeVerdict&) = default;
};

Json to_json(const JudgeVerdict& v);
JudgeVerdict verdict_from_json(const Json& j);

enum class JudgePrompt {
  scoring,    // suggestion-scoring template
  validator,  // issue-validator template (system message)
};

struct JudgeOptions {
  std::string backend_id = "heuristic";
  JudgePrompt prompt = JudgePrompt::scoring;
  double temperature = 0.0;
  int max_tokens = 2048;
};

ChatRequest build_judge_prompt(const Diff& diff, const std::vector<Issue>& issues,
                               JudgePrompt kind = JudgePrompt::scoring);

// Lenient reader for the judge's YAML-ish records. An empty reply is zero
// verdicts. Negative scores and invalid status map to 0; a score above 10 or
// a non-integer score throws Error(malformed_verdict) naming the index.
std::vector<JudgeVerdict> parse_verdicts(std::string_view reply);

// One verdict per issue, in issue order. A count mismatch is re-asked once,
// then reported as Error(unscored_review).
std::vector<JudgeVerdict> judge(const Gateway& gateway, const Diff& diff, const Review& review,
                                const JudgeOptions& opts);

}  // namespace cqs
