#include "cqs/pref_builder.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

namespace cqs {
namespace {

void check_pair_invariants(const PreferencePair& p, int delta) {
  if (!(p.chosen.tag == p.tag && p.rejected.tag == p.tag) || p.chosen_score - p.rejected_score != p.margin ||
      p.margin < delta || p.chosen == p.rejected) {
    throw Error(ErrorKind::contract, "preference pair invariant violated for diff '" + p.diff_id + "'");
  }
}

}  // namespace

std::vector<PreferencePair> build_pairs(const Diff& x, const std::vector<std::vector<ScoredIssue>>& scored,
                                        int delta) {
  if (delta < 1) throw Error(ErrorKind::invalid_argument, "delta must be >= 1");
  struct Flat {
    const ScoredIssue* s;
    std::size_t sample;
    std::size_t index;
  };
  std::vector<Flat> flat;
  for (std::size_t j = 0; j < scored.size(); ++j) {
    for (std::size_t k = 0; k < scored[j].size(); ++k) {
      const int score = scored[j][k].score;
      if (score < 0 || score > 10) throw Error(ErrorKind::invalid_argument, "score out of range");
      flat.push_back({&scored[j][k], j, k});
    }
  }

  struct Row {
    PreferencePair pair;
    std::tuple<std::size_t, std::size_t, std::size_t, std::size_t> source;
  };
  std::vector<Row> rows;
  std::set<std::pair<std::string, std::string>> seen;
  const std::string input = render_numbered(x);
  for (std::size_t a = 0; a < flat.size(); ++a) {
    for (std::size_t b = a + 1; b < flat.size(); ++b) {
      const ScoredIssue& ia = *flat[a].s;
      const ScoredIssue& ib = *flat[b].s;
      if (!(ia.issue.tag == ib.issue.tag)) continue;
      if (ia.issue == ib.issue) continue;
      const int diff = ia.score - ib.score;
      if (std::abs(diff) < delta) continue;
      const bool a_wins = diff > 0;
      const ScoredIssue& w = a_wins ? ia : ib;
      const ScoredIssue& l = a_wins ? ib : ia;
      if (!seen.emplace(serialize_issue(w.issue), serialize_issue(l.issue)).second) continue;
      PreferencePair p{x.diff_id, input, w.issue, l.issue, w.issue.tag, w.score, l.score, w.score - l.score};
      check_pair_invariants(p, delta);
      rows.push_back({std::move(p), {flat[a].sample, flat[a].index, flat[b].sample, flat[b].index}});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& r, const Row& s) {
    return std::make_tuple(r.pair.tag.name(), -r.pair.margin, r.source) <
           std::make_tuple(s.pair.tag.name(), -s.pair.margin, s.source);
  });
  std::vector<PreferencePair> out;
  out.reserve(rows.size());
  for (auto& r : rows) out.push_back(std::move(r.pair));
  return out;
}

Json to_json(const ScoredRecord& r) {
  Json samples = Json::array();
  for (std::size_t j = 0; j < r.samples.size(); ++j) {
    Json issues = Json::array();
    for (const auto& s : r.samples[j]) {
      Json i = to_json(s.issue);
      i["score"] = s.score;
      issues.push_back(std::move(i));
    }
    const int index = r.samples[j].empty() ? static_cast<int>(j) : r.samples[j].front().source_sample;
    samples.push_back(Json{{"sample_index", index}, {"issues", std::move(issues)}});
  }
  return Json{{"diff", diff_record_json(r.diff)}, {"samples", std::move(samples)}};
}

ScoredRecord scored_record_from_json(const Json& j) {
  ScoredRecord r;
  r.diff = diff_from_record(j.at("diff"));
  for (const auto& s : j.at("samples")) {
    const int index = s.value("sample_index", static_cast<int>(r.samples.size()));
    std::vector<ScoredIssue> issues;
    for (const auto& i : s.at("issues")) {
      issues.push_back({issue_from_json(i), i.at("score").get<int>(), index});
    }
    r.samples.push_back(std::move(issues));
  }
  return r;
}

PairDataset build_dataset(const std::vector<ScoredRecord>& records, int delta) {
  if (delta < 1) throw Error(ErrorKind::invalid_argument, "delta must be >= 1");
  PairDataset ds;
  for (const auto& r : records) {
    try {
      for (auto& p : build_pairs(r.diff, r.samples, delta)) {
        ++ds.per_tag[std::string(p.tag.name())];
        ++ds.margin_histogram[p.margin];
        ds.pairs.push_back(std::move(p));
      }
    } catch (const Error& e) {
      ds.failures.push_back({r.diff.diff_id, e.what()});
    }
  }
  return ds;
}

Json summary_json(const PairDataset& ds) {
  Json per_tag = Json::object();
  for (const auto& [tag, n] : ds.per_tag) per_tag[tag] = n;
  Json hist = Json::object();
  for (const auto& [m, n] : ds.margin_histogram) hist[std::to_string(m)] = n;
  Json failures = Json::array();
  for (const auto& f : ds.failures) failures.push_back(Json{{"diff_id", f.diff_id}, {"error", f.message}});
  return Json{{"count", ds.pairs.size()}, {"per_tag", per_tag}, {"margin_histogram", hist}, {"failures", failures}};
}

std::string dpo_jsonl(const std::vector<PreferencePair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    const Json row{{"diff_id", p.diff_id},
                   {"prompt", p.input},
                   {"chosen", serialize_issue(p.chosen)},
                   {"rejected", serialize_issue(p.rejected)},
                   {"tag", std::string(p.tag.name())},
                   {"chosen_score", p.chosen_score},
                   {"rejected_score", p.rejected_score},
                   {"margin", p.margin}};
    out += row.dump();
    out += '\n';
  }
  return out;
}

void emit_dpo_jsonl(const std::vector<PreferencePair>& pairs, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::io, "cannot write " + path);
  f << dpo_jsonl(pairs);
  if (!f.flush()) throw Error(ErrorKind::io, "write failed for " + path);
}

std::vector<PreferencePair> parse_dpo_jsonl(std::string_view text) {
  std::vector<PreferencePair> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    PreferencePair p;
    p.diff_id = j.at("diff_id").get<std::string>();
    p.input = j.at("prompt").get<std::string>();
    p.chosen = parse_issue_block(j.at("chosen").get<std::string>());
    p.rejected = parse_issue_block(j.at("rejected").get<std::string>());
    p.tag = canonical_tag(j.at("tag").get<std::string>());
    p.chosen_score = j.at("chosen_score").get<int>();
    p.rejected_score = j.at("rejected_score").get<int>();
    p.margin = j.at("margin").get<int>();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace cqs
