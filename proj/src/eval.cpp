#include "cqs/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cqs/code_text.hpp"
#include "cqs/prompts.hpp"

namespace cqs {

Json to_json(const BenchmarkEntry& e) {
  Json issues = Json::array();
  for (const auto& i : e.consensus_issues) issues.push_back(to_json(i));
  return Json{{"diff", diff_record_json(e.diff)}, {"consensus_issues", issues}};
}

BenchmarkEntry benchmark_entry_from_json(const Json& j) {
  BenchmarkEntry e;
  e.diff = diff_from_record(j.at("diff"));
  for (const auto& i : j.at("consensus_issues")) e.consensus_issues.push_back(issue_from_json(i));
  if (e.consensus_issues.empty()) {
    throw Error(ErrorKind::parse, "benchmark entry '" + e.diff.diff_id + "' has no consensus issues");
  }
  return e;
}

std::vector<BenchmarkEntry> parse_benchmark_jsonl(std::string_view text) {
  std::vector<BenchmarkEntry> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (!line.empty()) out.push_back(benchmark_entry_from_json(Json::parse(line)));
  }
  return out;
}

RationaleComparator make_comparator(const MatchConfig& cfg, const Gateway* gateway) {
  if (cfg.semantic_comparator == kTokenOverlapComparator) {
    const double threshold = cfg.overlap_threshold;
    return [threshold](std::string_view a, std::string_view b) { return token_jaccard(a, b) >= threshold; };
  }
  if (gateway == nullptr) throw Error(ErrorKind::invalid_argument, "semantic comparator needs a gateway");
  const std::string backend = cfg.semantic_comparator;
  return [gateway, backend](std::string_view a, std::string_view b) {
    ChatRequest req;
    req.system = std::string(prompts::kEquivalenceSystem);
    req.user = prompts::equivalence(a, b);
    std::string reply = trim(gateway->complete(req, backend).text);
    for (auto& c : reply) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (reply.rfind("equivalent", 0) == 0) return true;
    if (reply.rfind("different", 0) == 0) return false;
    throw Error(ErrorKind::parse, "comparator reply is neither 'equivalent' nor 'different'");
  };
}

namespace {

bool structural_edge(const Issue& p, const Issue& g, const MatchConfig& cfg) {
  if (p.tag.name() != g.tag.name()) return false;
  if (cfg.require_file_match && p.file != g.file) return false;
  return std::llabs(p.line - g.line) <= cfg.line_tolerance;
}

bool augment(std::size_t g, const std::vector<std::vector<std::size_t>>& adj, std::vector<bool>& seen,
             std::vector<std::optional<std::size_t>>& pred_owner) {
  for (std::size_t p : adj[g]) {
    if (seen[p]) continue;
    seen[p] = true;
    if (!pred_owner[p] || augment(*pred_owner[p], adj, seen, pred_owner)) {
      pred_owner[p] = g;
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<Match> match_issues(const std::vector<Issue>& pred, const std::vector<Issue>& gold,
                                const MatchConfig& cfg, const RationaleComparator& same) {
  if (cfg.line_tolerance < 0) throw Error(ErrorKind::invalid_argument, "line_tolerance must be >= 0");
  auto edge = [&](std::size_t p, std::size_t g) {
    return structural_edge(pred[p], gold[g], cfg) && same(pred[p].rationale, gold[g].rationale);
  };
  std::vector<Match> out;
  if (!cfg.optimal) {
    std::vector<bool> used(pred.size(), false);
    for (std::size_t g = 0; g < gold.size(); ++g) {
      for (std::size_t p = 0; p < pred.size(); ++p) {
        if (!used[p] && edge(p, g)) {
          used[p] = true;
          out.push_back({p, g});
          break;
        }
      }
    }
    return out;
  }
  std::vector<std::vector<std::size_t>> adj(gold.size());
  for (std::size_t g = 0; g < gold.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (edge(p, g)) adj[g].push_back(p);
    }
  }
  std::vector<std::optional<std::size_t>> owner(pred.size());
  for (std::size_t g = 0; g < gold.size(); ++g) {
    std::vector<bool> seen(pred.size(), false);
    augment(g, adj, seen, owner);
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (owner[p]) out.push_back({p, *owner[p]});
  }
  std::sort(out.begin(), out.end(), [](const Match& a, const Match& b) { return a.gold < b.gold; });
  return out;
}

Metrics compute_metrics(const std::vector<MatchCounts>& per_entry) {
  if (per_entry.empty()) throw Error(ErrorKind::invalid_argument, "empty benchmark");
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t matched = 0;
  for (const auto& c : per_entry) {
    if (c.matched > std::min(c.predicted, c.gold)) {
      throw Error(ErrorKind::contract, "matched count exceeds the smaller side");
    }
    predicted += c.predicted;
    gold += c.gold;
    matched += c.matched;
  }
  if (gold == 0) throw Error(ErrorKind::invalid_argument, "benchmark has no gold issues");
  Metrics m;
  m.issues_found = predicted;
  if (predicted > 0) m.precision = static_cast<double>(matched) / static_cast<double>(predicted);
  m.recall = static_cast<double>(matched) / static_cast<double>(gold);
  return m;
}

EvalPipeline make_pipeline(const Gateway& gateway, const PipelineConfig& cfg) {
  return [&gateway, cfg](const Diff& diff, int run) {
    const std::uint64_t seed = sample_seed(diff.diff_id, run, cfg.seed);
    Review review = collect(gateway, diff, cfg.collect, 0, seed);
    if (!cfg.validate) return review.issues;
    return validate(gateway, diff, review, cfg.filter, cfg.judge).final.issues;
  };
}

namespace {

Stat stat_of(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
    s.mean = xs.front();
    return s;
  }
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.spread = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

Json stat_json(const Stat& s) { return Json{{"mean", s.mean}, {"spread", s.spread}}; }

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

EvalReport run_eval(const std::vector<EvalSystem>& systems, const std::vector<BenchmarkEntry>& benchmark,
                    int runs, const MatchConfig& match_cfg, const RationaleComparator& same) {
  if (runs < 1) throw Error(ErrorKind::invalid_argument, "runs must be >= 1");
  if (benchmark.empty()) throw Error(ErrorKind::invalid_argument, "empty benchmark");
  EvalReport report;
  for (const auto& system : systems) {
    EvalRow row;
    row.method = system.method;
    row.runs = runs;
    try {
      for (int r = 0; r < runs; ++r) {
        std::vector<MatchCounts> counts;
        counts.reserve(benchmark.size());
        for (const auto& entry : benchmark) {
          const auto pred = system.pipeline(entry.diff, r);
          const auto matches = match_issues(pred, entry.consensus_issues, match_cfg, same);
          counts.push_back({pred.size(), entry.consensus_issues.size(), matches.size()});
        }
        row.per_run.push_back(compute_metrics(counts));
      }
      std::vector<double> found;
      std::vector<double> precision;
      std::vector<double> recall;
      for (const auto& m : row.per_run) {
        found.push_back(static_cast<double>(m.issues_found));
        if (m.precision) precision.push_back(*m.precision);
        recall.push_back(m.recall);
      }
      row.issues_found = stat_of(found);
      if (!precision.empty()) row.precision = stat_of(precision);
      row.recall = stat_of(recall);
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      row.per_run.clear();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

Json to_json(const EvalReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json row{{"method", r.method}, {"runs", r.runs}, {"failed", r.failed}};
    if (r.failed) {
      row["error"] = r.error;
    } else {
      row["issues_found"] = stat_json(r.issues_found);
      row["precision"] = r.precision ? stat_json(*r.precision) : Json(nullptr);
      row["recall"] = stat_json(r.recall);
      Json per_run = Json::array();
      for (const auto& m : r.per_run) {
        per_run.push_back(Json{{"issues_found", m.issues_found},
                               {"precision", m.precision ? Json(*m.precision) : Json(nullptr)},
                               {"recall", m.recall}});
      }
      row["per_run"] = per_run;
    }
    rows.push_back(std::move(row));
  }
  return Json{{"rows", rows}};
}

std::string render_table(const EvalReport& report) {
  std::ostringstream out;
  out << "| Method | # Issues Found | Precision (%) | Recall (%) |\n";
  out << "|---|---|---|---|\n";
  auto cell = [](const Stat& s, double scale, int runs) {
    std::string c = fixed2(s.mean * scale);
    if (runs > 1) c += " ± " + fixed2(s.spread * scale);
    return c;
  };
  for (const auto& r : report.rows) {
    out << "| " << r.method << " | ";
    if (r.failed) {
      out << "failed | failed | failed |\n";
      continue;
    }
    out << cell(r.issues_found, 1.0, r.runs) << " | "
        << (r.precision ? cell(*r.precision, 100.0, r.runs) : std::string("n/a")) << " | "
        << cell(r.recall, 100.0, r.runs) << " |\n";
  }
  return out.str();
}

LabeledIssue labeled_issue_from_json(const Json& j) {
  LabeledIssue l;
  l.diff = diff_from_record(j.at("diff"));
  l.issue = issue_from_json(j.at("issue"));
  const std::string s = j.at("sentiment").get<std::string>();
  if (s != "up" && s != "down") throw Error(ErrorKind::parse, "sentiment must be up or down");
  l.thumbs_up = s == "up";
  return l;
}

JudgeAccuracy judge_accuracy(const Gateway& gateway, const JudgeOptions& opts,
                             const std::vector<LabeledIssue>& labeled, int threshold) {
  if (labeled.empty()) throw Error(ErrorKind::invalid_argument, "no labeled issues");
  JudgeAccuracy acc;
  for (const auto& l : labeled) {
    Review review;
    review.diff_id = l.diff.diff_id;
    review.issues = {l.issue};
    const auto verdicts = judge(gateway, l.diff, review, opts);
    const bool predicted_up = verdicts.at(0).score >= threshold;
    acc.correct += predicted_up == l.thumbs_up ? 1 : 0;
    (l.thumbs_up ? acc.up : acc.down) += 1;
    ++acc.total;
  }
  acc.accuracy = static_cast<double>(acc.correct) / static_cast<double>(acc.total);
  return acc;
}

}  // namespace cqs
