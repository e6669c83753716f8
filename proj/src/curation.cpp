#include "cqs/curation.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "cqs/collector.hpp"
#include "cqs/prompts.hpp"

namespace cqs {

Eligibility diff_eligibility(const DiffMeta& meta) {
  Eligibility e;
  if (meta.human_comment_count <= 1) e.reasons.emplace_back("few-comments");
  if (meta.author_is_bot) e.reasons.emplace_back("bot-author");
  if (meta.is_test_only) e.reasons.emplace_back("test-only");
  e.eligible = e.reasons.empty();
  return e;
}

Json to_json(const HumanReviewRecord& r) {
  return Json{{"diff", diff_record_json(r.diff)}, {"review", to_json(r.review)}};
}

HumanReviewRecord human_record_from_json(const Json& j) {
  HumanReviewRecord r;
  r.diff = diff_from_record(j.at("diff"));
  r.review = review_from_json(j.at("review"));
  if (r.review.diff_id.empty()) r.review.diff_id = r.diff.diff_id;
  return r;
}

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string unwrap(std::string v) {
  v = trim(v);
  while (v.size() >= 2 && ((v.front() == '{' && v.back() == '}') || (v.front() == '"' && v.back() == '"') ||
                           (v.front() == '\'' && v.back() == '\''))) {
    v = trim(v.substr(1, v.size() - 2));
  }
  return v;
}

bool is_null_word(const std::string& v) {
  const std::string l = lower(v);
  return l.empty() || l == "null" || l == "none" || l == "n/a";
}

}  // namespace

Conclusion parse_conclusion(std::string_view reply) {
  const std::string text(reply);
  const auto open = text.find("<conclusion>");
  if (open == std::string::npos) throw Error(ErrorKind::parse, "reply has no <conclusion> block");
  const auto body_start = open + std::string_view("<conclusion>").size();
  auto close = text.find("</conclusion>", body_start);
  if (close == std::string::npos) close = text.size();
  const std::string body = text.substr(body_start, close - body_start);

  static const std::regex quality_re(R"(review_quality\s*:\s*([^\n]*))", std::regex::icase);
  static const std::regex rewrite_re(R"(review_rewrite\s*:\s*)", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(body, m, quality_re)) {
    throw Error(ErrorKind::parse, "conclusion block has no review_quality");
  }
  const std::string q = lower(unwrap(m[1].str()));
  Conclusion c;
  if (q == "good") {
    c.quality = ReviewQuality::good;
  } else if (q == "bad") {
    c.quality = ReviewQuality::bad;
  } else {
    throw Error(ErrorKind::parse, "review_quality must be good or bad, got '" + q + "'");
  }
  if (std::regex_search(body, m, rewrite_re)) {
    std::string rest = body.substr(static_cast<std::size_t>(m.position(0) + m.length(0)));
    // The rewrite runs to the end of the block unless another key follows.
    static const std::regex next_key(R"(\n\s*review_quality\s*:)", std::regex::icase);
    std::smatch k;
    if (std::regex_search(rest, k, next_key)) rest = rest.substr(0, static_cast<std::size_t>(k.position(0)));
    std::string v = unwrap(rest);
    std::replace(v.begin(), v.end(), '\n', ' ');
    v = trim(v);
    if (!is_null_word(v)) c.rewrite = v;
  }
  return c;
}

std::vector<IssueRewrite> rewrite_human_review(const Gateway& gateway, const HumanReviewRecord& record,
                                               const CurationOptions& opts) {
  const std::string numbered = render_numbered(record.diff);
  std::vector<IssueRewrite> out;
  for (const auto& issue : record.review.issues) {
    ChatRequest req;
    req.system = std::string(prompts::kCurationSystem);
    req.user = prompts::rewrite_human_review(numbered, issue);
    req.temperature = opts.temperature;
    IssueRewrite r;
    try {
      const Conclusion c = parse_conclusion(gateway.complete(req, opts.backend_id).text);
      r.quality = c.quality;
      r.rewrite = c.rewrite;
    } catch (const GatewayError&) {
      throw;
    } catch (const Error& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

SftDataset curate_sft_dataset(const Gateway& gateway, const std::vector<HumanReviewRecord>& records,
                              const CurationOptions& opts) {
  SftDataset ds;
  for (const auto& record : records) {
    if (!diff_eligibility(record.diff.meta).eligible) {
      ++ds.ineligible_diffs;
      continue;
    }
    const auto rewrites = rewrite_human_review(gateway, record, opts);
    std::string target;
    int kept = 0;
    for (std::size_t i = 0; i < rewrites.size(); ++i) {
      const auto& r = rewrites[i];
      if (!r.quality) {
        ++ds.parse_errors;
        ++ds.dropped_issues;
        continue;
      }
      if (*r.quality != ReviewQuality::good) {
        ++ds.dropped_issues;
        continue;
      }
      Issue issue = record.review.issues[i];
      if (r.rewrite) issue.rationale = *r.rewrite;
      target += serialize_issue(issue);
      target += '\n';
      ++kept;
    }
    ds.kept_issues += kept;
    if (kept == 0) {
      ++ds.omitted_diffs;
      continue;
    }
    ds.rows.push_back({record.diff.diff_id,
                       build_collector_prompt(record.diff, record.diff.meta, default_tags()).user, target});
  }
  return ds;
}

Json to_json(const SftRow& row) {
  return Json{{"diff_id", row.diff_id}, {"prompt", row.prompt}, {"target", row.target}};
}

Json summary_json(const SftDataset& ds) {
  return Json{{"rows", ds.rows.size()},          {"ineligible_diffs", ds.ineligible_diffs},
              {"omitted_diffs", ds.omitted_diffs}, {"kept_issues", ds.kept_issues},
              {"dropped_issues", ds.dropped_issues}, {"parse_errors", ds.parse_errors}};
}

// ---------------------------------------------------------------------------

void validate_critique_input(const Json& j) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::parse, "critique input: " + what); };
  if (!j.is_object()) fail("row is not an object");
  auto need_string = [&](const char* key, bool allow_empty) {
    if (!j.contains(key) || !j[key].is_string()) fail(std::string("'") + key + "' must be a string");
    if (!allow_empty && j[key].get<std::string>().empty()) fail(std::string("'") + key + "' is empty");
  };
  need_string("feedback_id", false);
  need_string("review_id", false);
  need_string("reviewer_id", false);
  need_string("timestamp", false);
  need_string("comment", true);
  if (!j.contains("sentiment") || !j["sentiment"].is_string() ||
      (j["sentiment"] != "up" && j["sentiment"] != "down")) {
    fail("'sentiment' must be \"up\" or \"down\"");
  }
  if (!j.contains("issue_index") || !j["issue_index"].is_number_integer() || j["issue_index"].get<int>() < 0) {
    fail("'issue_index' must be a non-negative integer");
  }
  if (!j.contains("diff") || !j["diff"].is_object()) fail("'diff' must be an object");
  if (!j.contains("issue") || !j["issue"].is_object()) fail("'issue' must be an object");
  try {
    const Diff d = diff_from_record(j["diff"]);
    const Issue issue = issue_from_json(j["issue"]);
    validate_issue(issue);
  } catch (const Error& e) {
    fail(e.what());
  } catch (const Json::exception& e) {
    fail(e.what());
  }
}

Json to_json(const CritiqueInput& in) {
  return Json{{"feedback_id", in.feedback_id},
              {"review_id", in.review_id},
              {"reviewer_id", in.reviewer_id},
              {"timestamp", in.timestamp},
              {"diff", diff_record_json(in.diff)},
              {"issue_index", in.issue_index},
              {"issue", to_json(in.issue)},
              {"sentiment", in.thumbs_up ? "up" : "down"},
              {"comment", in.comment}};
}

CritiqueInput critique_input_from_json(const Json& j) {
  validate_critique_input(j);
  CritiqueInput in;
  in.feedback_id = j["feedback_id"].get<std::string>();
  in.review_id = j["review_id"].get<std::string>();
  in.reviewer_id = j["reviewer_id"].get<std::string>();
  in.timestamp = j["timestamp"].get<std::string>();
  in.diff = diff_from_record(j["diff"]);
  in.issue_index = j["issue_index"].get<int>();
  in.issue = issue_from_json(j["issue"]);
  in.thumbs_up = j["sentiment"] == "up";
  in.comment = j["comment"].get<std::string>();
  return in;
}

Json to_json(const CritiqueSample& s) {
  return Json{{"diff_id", s.diff_id},
              {"feedback_id", s.feedback_id},
              {"issue", to_json(s.issue)},
              {"sentiment", s.thumbs_up ? "up" : "down"},
              {"critique", s.critique},
              {"quality", s.quality},
              {"kept", s.kept}};
}

CritiqueReply parse_critique_reply(std::string_view reply) {
  std::string text(reply);
  if (const auto fence = text.find("```yaml"); fence != std::string::npos) {
    text = text.substr(fence + 7);
    if (const auto end = text.find("```"); end != std::string::npos) text = text.substr(0, end);
  }
  static const std::regex quality_re(R"re("?human_feedback_quality"?\s*:\s*"?\{?\s*(-?\d+))re");
  static const std::regex critique_re(R"re("?critique"?\s*:\s*([^\n]*))re");
  std::smatch m;
  if (!std::regex_search(text, m, quality_re)) {
    throw Error(ErrorKind::parse, "reply has no integer human_feedback_quality");
  }
  CritiqueReply r;
  r.quality = std::stoi(m[1].str());
  if (r.quality < 0 || r.quality > 5) {
    throw Error(ErrorKind::parse, "human_feedback_quality " + m[1].str() + " is outside 0-5");
  }
  if (!std::regex_search(text, m, critique_re)) throw Error(ErrorKind::parse, "reply has no critique");
  std::string raw = trim(m[1].str());
  try {
    const Json j = Json::parse(raw);
    if (j.is_string()) raw = j.get<std::string>();
  } catch (const Json::exception&) {
    raw = unwrap(raw);
  }
  r.critique = trim(raw);
  if (r.critique.empty()) throw Error(ErrorKind::parse, "critique is empty");
  return r;
}

CritiqueSample rewrite_feedback_critique(const Gateway& gateway, const Diff& diff, const Issue& issue,
                                         bool thumbs_up, std::string_view comment,
                                         const CurationOptions& opts) {
  ChatRequest req;
  req.system = std::string(prompts::kCurationSystem);
  req.user = prompts::feedback_critique(render_numbered(diff), issue, thumbs_up, comment);
  req.temperature = opts.temperature;
  const CritiqueReply r = parse_critique_reply(gateway.complete(req, opts.backend_id).text);
  CritiqueSample s;
  s.diff_id = diff.diff_id;
  s.issue = issue;
  s.thumbs_up = thumbs_up;
  s.critique = r.critique;
  s.quality = r.quality;
  s.kept = r.quality >= opts.critique_keep_threshold;
  return s;
}

CritiqueDataset curate_critiques(const Gateway& gateway, const std::vector<CritiqueInput>& inputs,
                                 const CurationOptions& opts) {
  CritiqueDataset ds;
  for (const auto& in : inputs) {
    try {
      CritiqueSample s = rewrite_feedback_critique(gateway, in.diff, in.issue, in.thumbs_up, in.comment, opts);
      s.feedback_id = in.feedback_id;
      (s.kept ? ds.kept : ds.filtered) += 1;
      ds.samples.push_back(std::move(s));
    } catch (const GatewayError&) {
      throw;
    } catch (const Error&) {
      ++ds.errors;
    }
  }
  return ds;
}

Json summary_json(const CritiqueDataset& ds) {
  return Json{{"samples", ds.samples.size()}, {"kept", ds.kept}, {"filtered", ds.filtered}, {"errors", ds.errors}};
}

}  // namespace cqs
