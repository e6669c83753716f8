#pragma once

// Reference implementations written independently of the library, used as
// oracles by the unit and acceptance suites.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "cqs/dpo.hpp"
#include "cqs/pref_builder.hpp"

namespace cqs_test {

// ---------------------------------------------------------------------------
// Preference pairs: every ordered (winner, loser) combination over all issues
// of all samples with equal tags, different content and a score gap >= delta.

struct OraclePair {
  std::string chosen;  // serialized block
  std::string rejected;
  int chosen_score;
  int rejected_score;
  friend auto operator<=>(const OraclePair&, const OraclePair&) = default;
};

inline std::set<OraclePair> brute_force_pairs(const std::vector<std::vector<cqs::ScoredIssue>>& scored, int delta) {
  std::vector<cqs::ScoredIssue> all;
  for (const auto& s : scored) all.insert(all.end(), s.begin(), s.end());
  std::set<OraclePair> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (i == j) continue;
      const auto& a = all[i];
      const auto& b = all[j];
      if (a.issue.tag.name() != b.issue.tag.name()) continue;
      if (cqs::serialize_issue(a.issue) == cqs::serialize_issue(b.issue)) continue;
      if (a.score - b.score >= delta) {
        out.insert({cqs::serialize_issue(a.issue), cqs::serialize_issue(b.issue), a.score, b.score});
      }
    }
  }
  return out;
}

// Content keys of the oracle set, i.e. the pairs once duplicates collapse.
inline std::set<std::pair<std::string, std::string>> oracle_keys(const std::set<OraclePair>& pairs) {
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& p : pairs) keys.emplace(p.chosen, p.rejected);
  return keys;
}

struct PairInstance {
  std::vector<std::vector<cqs::ScoredIssue>> scored;
  int delta = 1;
};

// Small tag, rationale and line pools force collisions, so duplicate content
// across samples and same-tag pairs are common.
inline PairInstance random_pair_instance(std::mt19937_64& rng) {
  static const std::vector<cqs::IssueTag> tags = {cqs::CanonicalTag::Documentation, cqs::CanonicalTag::DivisionByZero,
                                                  cqs::IssueTag::custom("HardcodedTimeout")};
  static const std::vector<std::string> rationales = {"Could this be simpler?", "Is the divisor checked?",
                                                      "Would a docstring help?"};
  std::uniform_int_distribution<int> samples(0, 5), issues(0, 6), score(0, 10), delta(1, 6), pick(0, 2),
      line(1, 3), has_fn(0, 1);
  PairInstance inst;
  inst.delta = delta(rng);
  const int n = samples(rng);
  for (int j = 0; j < n; ++j) {
    std::vector<cqs::ScoredIssue> sample;
    const int m = issues(rng);
    for (int k = 0; k < m; ++k) {
      cqs::Issue issue;
      issue.tag = tags[static_cast<std::size_t>(pick(rng))];
      issue.rationale = rationales[static_cast<std::size_t>(pick(rng))];
      issue.file = "a.py";
      issue.line = line(rng);
      if (has_fn(rng) == 1) issue.function = "f";
      sample.push_back({issue, score(rng), j});
    }
    inst.scored.push_back(std::move(sample));
  }
  return inst;
}

// Compares build_pairs output against the oracle. Returns an empty string on
// agreement, otherwise a description of the first difference.
inline std::string compare_with_oracle(const std::vector<cqs::PreferencePair>& got, const PairInstance& inst) {
  const auto oracle = brute_force_pairs(inst.scored, inst.delta);
  const auto keys = oracle_keys(oracle);
  std::set<std::pair<std::string, std::string>> got_keys;
  for (const auto& p : got) {
    const OraclePair op{cqs::serialize_issue(p.chosen), cqs::serialize_issue(p.rejected), p.chosen_score,
                        p.rejected_score};
    if (oracle.count(op) == 0) return "pair not produced by the oracle";
    if (p.margin != p.chosen_score - p.rejected_score) return "margin disagrees with scores";
    if (!got_keys.emplace(op.chosen, op.rejected).second) return "duplicate row";
  }
  if (got_keys != keys) {
    return "pair sets differ: got " + std::to_string(got_keys.size()) + ", oracle " + std::to_string(keys.size());
  }
  return {};
}

// ---------------------------------------------------------------------------
// Generated unified diffs with their expected numbering.

struct ExpectedLine {
  char sym;
  std::int64_t old_no;  // 0 when absent
  std::int64_t new_no;
  std::string content;
};

struct GeneratedDiff {
  std::string text;
  std::vector<std::string> paths;
  std::vector<std::vector<ExpectedLine>> lines;  // per file, in order
};

inline GeneratedDiff generate_diff(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> files(1, 3), hunks(1, 4), ops(1, 12), op(0, 2), gap(0, 20), word(0, 5);
  static const std::vector<std::string> words = {"x = 1", "return y", "", "  if a:", "\tfoo();", "// note"};
  GeneratedDiff g;
  const int nf = files(rng);
  for (int f = 0; f < nf; ++f) {
    const std::string path = "dir" + std::to_string(f) + "/file" + std::to_string(f) + ".py";
    g.paths.push_back(path);
    g.lines.emplace_back();
    g.text += "diff --git a/" + path + " b/" + path + "\nindex 0000000..1111111 100644\n";
    g.text += "--- a/" + path + "\n+++ b/" + path + "\n";
    std::int64_t old_at = 1;
    std::int64_t new_at = 1;
    const int nh = hunks(rng);
    for (int h = 0; h < nh; ++h) {
      const int skip = gap(rng);
      old_at += skip;
      new_at += skip;
      std::vector<ExpectedLine> body;
      std::int64_t o = old_at;
      std::int64_t n = new_at;
      const int count = ops(rng);
      for (int k = 0; k < count; ++k) {
        const std::string content = words[static_cast<std::size_t>(word(rng))] + " #" + std::to_string(k);
        switch (op(rng)) {
          case 0: body.push_back({'+', 0, n++, content}); break;
          case 1: body.push_back({'-', o++, 0, content}); break;
          default: body.push_back({' ', o++, n++, content}); break;
        }
      }
      const std::int64_t old_len = o - old_at;
      const std::int64_t new_len = n - new_at;
      g.text += "@@ -" + std::to_string(old_at) + "," + std::to_string(old_len) + " +" + std::to_string(new_at) + "," +
                std::to_string(new_len) + " @@\n";
      for (const auto& l : body) g.text += std::string(1, l.sym) + l.content + "\n";
      g.lines.back().insert(g.lines.back().end(), body.begin(), body.end());
      old_at = o;
      new_at = n;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// DPO reference: -log sigmoid(z) in long double straight from the definition.

inline long double reference_loss(long double z) { return std::log1p(std::exp(-z)); }

inline long double reference_logit(const cqs::SequenceLogProbs& ex, long double beta) {
  long double pc = 0, rc = 0, pr = 0, rr = 0;
  for (double v : ex.policy_chosen) pc += v;
  for (double v : ex.ref_chosen) rc += v;
  for (double v : ex.policy_rejected) pr += v;
  for (double v : ex.ref_rejected) rr += v;
  return beta * ((pc - rc) - (pr - rr));
}

inline cqs::SequenceLogProbs random_logprobs(std::mt19937_64& rng, int max_len = 12, double scale = 3.0) {
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_real_distribution<double> lp(-scale, 0.0);
  cqs::SequenceLogProbs ex;
  const int lc = len(rng);
  const int lr = len(rng);
  for (int i = 0; i < lc; ++i) {
    ex.policy_chosen.push_back(lp(rng));
    ex.ref_chosen.push_back(lp(rng));
  }
  for (int i = 0; i < lr; ++i) {
    ex.policy_rejected.push_back(lp(rng));
    ex.ref_rejected.push_back(lp(rng));
  }
  return ex;
}

}  // namespace cqs_test
