#include "cqs/service.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "cqs/curation.hpp"

namespace cqs {

std::string format_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::chrono::system_clock::time_point parse_time(std::string_view s) {
  std::tm tm{};
  std::istringstream in{std::string(s)};
  in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  if (in.fail()) throw Error(ErrorKind::parse, "bad timestamp '" + std::string(s) + "'");
  return std::chrono::system_clock::from_time_t(timegm(&tm));
}

Json to_json(const StoredReview& r) {
  Json audit = Json::array();
  for (const auto& o : r.audit) audit.push_back(to_json(o));
  return Json{{"review_id", r.review_id},
              {"created_at", r.created_at},
              {"diff", diff_record_json(r.diff)},
              {"final", to_json(r.final)},
              {"audit", audit}};
}

StoredReview stored_review_from_json(const Json& j) {
  StoredReview r;
  r.review_id = j.at("review_id").get<std::string>();
  r.created_at = j.at("created_at").get<std::string>();
  r.diff = diff_from_record(j.at("diff"));
  r.final = review_from_json(j.at("final"));
  for (const auto& o : j.at("audit")) r.audit.push_back(outcome_from_json(o));
  return r;
}

Json to_json(const FeedbackRecord& f) {
  return Json{{"feedback_id", f.feedback_id},
              {"review_id", f.review_id},
              {"issue_index", f.issue_index},
              {"sentiment", f.thumbs_up ? "up" : "down"},
              {"comment", f.comment ? Json(*f.comment) : Json(nullptr)},
              {"reviewer_id", f.reviewer_id},
              {"timestamp", f.timestamp}};
}

FeedbackRecord feedback_from_json(const Json& j) {
  FeedbackRecord f;
  f.feedback_id = j.at("feedback_id").get<std::string>();
  f.review_id = j.at("review_id").get<std::string>();
  f.issue_index = j.at("issue_index").get<int>();
  f.thumbs_up = j.at("sentiment").get<std::string>() == "up";
  if (j.contains("comment") && !j["comment"].is_null()) f.comment = j["comment"].get<std::string>();
  f.reviewer_id = j.at("reviewer_id").get<std::string>();
  f.timestamp = j.at("timestamp").get<std::string>();
  return f;
}

namespace {

constexpr std::string_view kReviewsLog = "reviews.log";
constexpr std::string_view kFeedbackLog = "feedback.log";
constexpr auto kWindow = std::chrono::hours(24 * 7);

std::string sequence_id(const char* prefix, long long n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06lld", prefix, n);
  return buf;
}

long long sequence_of(const std::string& id) {
  const auto dash = id.rfind('-');
  if (dash == std::string::npos) return 0;
  try {
    return std::stoll(id.substr(dash + 1));
  } catch (const std::exception&) {
    return 0;
  }
}

std::string content_diff_id(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "diff-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json error_body(const Error& e) {
  Json body{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}};
  if (const auto* g = dynamic_cast<const GatewayError*>(&e)) body["backend_id"] = g->backend_id();
  return body;
}

int status_for(const Error& e) {
  if (dynamic_cast<const GatewayError*>(&e) != nullptr) return 502;
  switch (e.kind()) {
    case ErrorKind::not_found: return 404;
    case ErrorKind::diff_parse:
    case ErrorKind::parse:
    case ErrorKind::invalid_argument:
    case ErrorKind::invalid_tag:
    case ErrorKind::unknown_file:
      return 422;
    case ErrorKind::malformed_verdict:
    case ErrorKind::unscored_review:
      return 502;
    default:
      return 500;
  }
}

HttpResponse json_response(int status, const Json& body) {
  HttpResponse r;
  r.status = status;
  r.body = body.dump() + "\n";
  return r;
}

}  // namespace

struct Service::Impl {
  const Gateway& gateway;
  ServiceOptions opts;
  std::filesystem::path dir;

  mutable std::shared_mutex mu;
  std::map<std::string, StoredReview> reviews;  // review_id order == submission order
  std::map<std::string, FeedbackRecord> live_feedback;  // key: review \x1f index \x1f reviewer
  long long next_review = 1;
  long long next_feedback = 1;
  std::mutex write_mu;

  httplib::Server server;
  std::atomic<int> port{0};

  Impl(const Gateway& gw, ServiceOptions o) : gateway(gw), opts(std::move(o)), dir(opts.store_dir) {
    if (!opts.clock) opts.clock = [] { return std::chrono::system_clock::now(); };
    std::filesystem::create_directories(dir);
    replay();
  }

  static std::string feedback_key(const std::string& review_id, int index, const std::string& reviewer) {
    return review_id + '\x1f' + std::to_string(index) + '\x1f' + reviewer;
  }

  template <typename F>
  void each_line(std::string_view name, F&& f) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) return;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (trim(line).empty()) continue;
      try {
        f(Json::parse(line));
      } catch (const std::exception& e) {
        throw Error(ErrorKind::io, std::string(name) + " line " + std::to_string(n) + ": " + e.what());
      }
    }
  }

  void replay() {
    each_line(kReviewsLog, [&](const Json& j) {
      const std::string op = j.at("op").get<std::string>();
      if (op == "put") {
        StoredReview r = stored_review_from_json(j.at("review"));
        next_review = std::max(next_review, sequence_of(r.review_id) + 1);
        reviews[r.review_id] = std::move(r);
      } else if (op == "delete") {
        reviews.erase(j.at("review_id").get<std::string>());
      } else {
        throw Error(ErrorKind::io, "unknown op " + op);
      }
    });
    each_line(kFeedbackLog, [&](const Json& j) {
      FeedbackRecord f = feedback_from_json(j.at("feedback"));
      next_feedback = std::max(next_feedback, sequence_of(f.feedback_id) + 1);
      live_feedback[feedback_key(f.review_id, f.issue_index, f.reviewer_id)] = std::move(f);
    });
  }

  void append(std::string_view name, const Json& row) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::app);
    out << row.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::io, "cannot append to " + (dir / name).string());
  }
};

Service::Service(const Gateway& gateway, ServiceOptions opts)
    : impl_(std::make_unique<Impl>(gateway, std::move(opts))) {}

Service::~Service() { stop(); }

StoredReview Service::submit_review(std::string_view diff_text, const DiffMeta& meta, std::string diff_id) {
  if (diff_id.empty()) diff_id = content_diff_id(diff_text);
  const Diff diff = parse_unified(diff_text, meta, diff_id);
  const Review collected = collect(impl_->gateway, diff, impl_->opts.collect);
  Validation v = validate(impl_->gateway, diff, collected, impl_->opts.filter, impl_->opts.judge);

  std::lock_guard write(impl_->write_mu);
  StoredReview r;
  r.diff = diff;
  r.final = std::move(v.final);
  r.audit = std::move(v.audit);
  r.created_at = format_time(impl_->opts.clock());
  {
    std::shared_lock read(impl_->mu);
    r.review_id = sequence_id("rev", impl_->next_review);
  }
  impl_->append(kReviewsLog, Json{{"op", "put"}, {"review", to_json(r)}});
  std::unique_lock lock(impl_->mu);
  ++impl_->next_review;
  impl_->reviews[r.review_id] = r;
  return r;
}

std::optional<StoredReview> Service::review(const std::string& review_id) const {
  std::shared_lock lock(impl_->mu);
  auto it = impl_->reviews.find(review_id);
  if (it == impl_->reviews.end()) return std::nullopt;
  return it->second;
}

std::vector<StoredReview> Service::reviews() const {
  std::shared_lock lock(impl_->mu);
  std::vector<StoredReview> out;
  for (const auto& [_, r] : impl_->reviews) out.push_back(r);
  return out;
}

bool Service::delete_review(const std::string& review_id) {
  std::lock_guard write(impl_->write_mu);
  {
    std::shared_lock read(impl_->mu);
    if (impl_->reviews.count(review_id) == 0) return false;
  }
  impl_->append(kReviewsLog, Json{{"op", "delete"}, {"review_id", review_id}});
  std::unique_lock lock(impl_->mu);
  impl_->reviews.erase(review_id);
  return true;
}

FeedbackRecord Service::record_feedback(const std::string& review_id, int issue_index, bool thumbs_up,
                                        std::optional<std::string> comment, const std::string& reviewer_id) {
  if (reviewer_id.empty()) throw Error(ErrorKind::invalid_argument, "reviewer_id is empty");
  std::lock_guard write(impl_->write_mu);
  FeedbackRecord f;
  {
    std::shared_lock read(impl_->mu);
    auto it = impl_->reviews.find(review_id);
    if (it == impl_->reviews.end()) throw Error(ErrorKind::not_found, "unknown review '" + review_id + "'");
    const auto count = static_cast<int>(it->second.final.issues.size());
    if (issue_index < 0 || issue_index >= count) {
      throw Error(ErrorKind::invalid_argument, "issue_index " + std::to_string(issue_index) +
                                                   " out of range for a review with " + std::to_string(count) +
                                                   " issues");
    }
    f.feedback_id = sequence_id("fb", impl_->next_feedback);
  }
  f.review_id = review_id;
  f.issue_index = issue_index;
  f.thumbs_up = thumbs_up;
  f.comment = std::move(comment);
  f.reviewer_id = reviewer_id;
  f.timestamp = format_time(impl_->opts.clock());
  impl_->append(kFeedbackLog, Json{{"op", "put"}, {"feedback", to_json(f)}});
  std::unique_lock lock(impl_->mu);
  ++impl_->next_feedback;
  impl_->live_feedback[Impl::feedback_key(review_id, issue_index, reviewer_id)] = f;
  return f;
}

std::vector<FeedbackRecord> Service::feedback() const {
  std::shared_lock lock(impl_->mu);
  std::vector<FeedbackRecord> out;
  for (const auto& [_, f] : impl_->live_feedback) out.push_back(f);
  std::sort(out.begin(), out.end(),
            [](const FeedbackRecord& a, const FeedbackRecord& b) { return a.feedback_id < b.feedback_id; });
  return out;
}

Service::Export Service::export_critiques() const {
  const auto records = feedback();
  std::shared_lock lock(impl_->mu);
  Export ex;
  for (const auto& f : records) {
    auto it = impl_->reviews.find(f.review_id);
    if (it == impl_->reviews.end()) {
      ++ex.orphans;
      continue;
    }
    CritiqueInput in;
    in.feedback_id = f.feedback_id;
    in.review_id = f.review_id;
    in.reviewer_id = f.reviewer_id;
    in.timestamp = f.timestamp;
    in.diff = it->second.diff;
    in.issue_index = f.issue_index;
    in.issue = it->second.final.issues.at(static_cast<std::size_t>(f.issue_index));
    in.thumbs_up = f.thumbs_up;
    in.comment = f.comment.value_or("");
    ex.jsonl += to_json(in).dump();
    ex.jsonl += '\n';
    ++ex.rows;
  }
  return ex;
}

Json Service::metrics() const {
  const auto records = feedback();
  const auto now = impl_->opts.clock();
  std::shared_lock lock(impl_->mu);
  int kept = 0;
  int dropped = 0;
  Json by_reason = Json::object();
  for (const auto& id : rule_ids()) by_reason[id] = 0;
  for (const auto& [_, r] : impl_->reviews) {
    for (const auto& o : r.audit) {
      if (o.kept) {
        ++kept;
      } else {
        ++dropped;
        by_reason[o.reasons.front()] = by_reason[o.reasons.front()].get<int>() + 1;
      }
    }
  }
  int up = 0;
  int down = 0;
  std::optional<std::chrono::system_clock::time_point> earliest;
  for (const auto& f : records) {
    (f.thumbs_up ? up : down) += 1;
    const auto t = parse_time(f.timestamp);
    if (!earliest || t < *earliest) earliest = t;
  }
  auto fraction = [](int u, int d) { return u + d == 0 ? Json(nullptr) : Json(static_cast<double>(u) / (u + d)); };
  Json windows = Json::array();
  if (earliest) {
    for (auto end = now; end >= *earliest || windows.empty(); end -= kWindow) {
      const auto start = end - kWindow;
      int wu = 0;
      int wd = 0;
      for (const auto& f : records) {
        const auto t = parse_time(f.timestamp);
        if (t > start && t <= end) (f.thumbs_up ? wu : wd) += 1;
      }
      windows.push_back(Json{{"start", format_time(start)},
                             {"end", format_time(end)},
                             {"up", wu},
                             {"down", wd},
                             {"helpfulness", fraction(wu, wd)}});
    }
  }
  return Json{{"reviews_served", impl_->reviews.size()},
              {"issues_kept", kept},
              {"issues_dropped", dropped},
              {"dropped_by_reason", by_reason},
              {"feedback_up", up},
              {"feedback_down", down},
              {"helpfulness", fraction(up, down)},
              {"helpfulness_windows", windows}};
}

namespace {

Json review_view(const StoredReview& r, bool debug) {
  Json issues = Json::array();
  for (const auto& i : r.final.issues) issues.push_back(to_json(i));
  Json view{{"review_id", r.review_id},
            {"diff_id", r.diff.diff_id},
            {"created_at", r.created_at},
            {"numbered_diff", render_numbered(r.diff)},
            {"issues", issues}};
  if (debug) {
    Json audit = Json::array();
    for (const auto& o : r.audit) audit.push_back(to_json(o));
    view["audit"] = audit;
  }
  return view;
}

}  // namespace

HttpResponse Service::handle(const HttpRequest& req) {
  static const std::regex review_path(R"(^/v1/reviews/([^/]+)$)");
  std::smatch m;
  try {
    if (req.path == "/v1/reviews") {
      if (req.method == "POST") {
        std::string text = req.body;
        DiffMeta meta;
        std::string diff_id;
        const std::string t = trim(req.body);
        if (!t.empty() && t.front() == '{') {
          Json body;
          try {
            body = Json::parse(req.body);
          } catch (const Json::exception& e) {
            throw Error(ErrorKind::parse, std::string("request body is not valid JSON: ") + e.what());
          }
          if (!body.contains("diff") || !body["diff"].is_string()) {
            throw Error(ErrorKind::parse, "request body needs a string 'diff' field");
          }
          text = body["diff"].get<std::string>();
          meta = meta_from_json(body.contains("meta") ? body["meta"] : Json());
          diff_id = body.value("diff_id", std::string{});
        }
        const StoredReview r = submit_review(text, meta, diff_id);
        return json_response(200, review_view(r, false));
      }
      if (req.method == "GET") {
        Json list = Json::array();
        for (const auto& r : reviews()) {
          list.push_back(Json{{"review_id", r.review_id},
                              {"diff_id", r.diff.diff_id},
                              {"created_at", r.created_at},
                              {"issue_count", r.final.issues.size()}});
        }
        return json_response(200, Json{{"reviews", list}});
      }
      return json_response(405, Json{{"error", "method_not_allowed"}});
    }
    if (std::regex_match(req.path, m, review_path)) {
      const std::string id = m[1].str();
      if (req.method == "GET") {
        const auto r = review(id);
        if (!r) throw Error(ErrorKind::not_found, "unknown review '" + id + "'");
        auto q = req.query.find("debug");
        const bool debug = q != req.query.end() && (q->second == "1" || q->second == "true");
        return json_response(200, review_view(*r, debug));
      }
      if (req.method == "DELETE") {
        if (!delete_review(id)) throw Error(ErrorKind::not_found, "unknown review '" + id + "'");
        return json_response(200, Json{{"deleted", id}});
      }
      return json_response(405, Json{{"error", "method_not_allowed"}});
    }
    if (req.path == "/v1/issues/feedback") {
      if (req.method == "POST") {
        Json body;
        try {
          body = Json::parse(req.body);
        } catch (const Json::exception& e) {
          throw Error(ErrorKind::parse, std::string("request body is not valid JSON: ") + e.what());
        }
        if (!body.is_object() || !body.contains("review_id") || !body["review_id"].is_string()) {
          throw Error(ErrorKind::parse, "feedback needs a string 'review_id'");
        }
        if (!body.contains("issue_index") || !body["issue_index"].is_number_integer()) {
          throw Error(ErrorKind::parse, "feedback needs an integer 'issue_index'");
        }
        const std::string sentiment = body.value("sentiment", std::string{});
        if (sentiment != "up" && sentiment != "down") {
          throw Error(ErrorKind::parse, "feedback 'sentiment' must be \"up\" or \"down\"");
        }
        std::optional<std::string> comment;
        if (body.contains("comment") && !body["comment"].is_null()) {
          if (!body["comment"].is_string()) throw Error(ErrorKind::parse, "'comment' must be a string");
          comment = body["comment"].get<std::string>();
        }
        std::string reviewer = body.value("reviewer_id", std::string{});
        if (reviewer.empty()) {
          auto h = req.headers.find("x-reviewer-id");
          reviewer = h != req.headers.end() ? h->second : "anonymous";
        }
        const auto f = record_feedback(body["review_id"].get<std::string>(), body["issue_index"].get<int>(),
                                       sentiment == "up", comment, reviewer);
        return json_response(200, to_json(f));
      }
      if (req.method == "GET") {
        auto q = req.query.find("review_id");
        Json list = Json::array();
        for (const auto& f : feedback()) {
          if (q == req.query.end() || q->second == f.review_id) list.push_back(to_json(f));
        }
        return json_response(200, Json{{"feedback", list}});
      }
      return json_response(405, Json{{"error", "method_not_allowed"}});
    }
    if (req.path == "/v1/export/critiques" && req.method == "GET") {
      const auto ex = export_critiques();
      HttpResponse r;
      r.body = ex.jsonl;
      r.content_type = "application/x-ndjson";
      r.headers["X-Export-Warnings"] = std::to_string(ex.orphans);
      return r;
    }
    if (req.path == "/v1/metrics" && req.method == "GET") return json_response(200, metrics());
    return json_response(404, Json{{"error", "not_found"}, {"message", "no route for " + req.path}});
  } catch (const Error& e) {
    return json_response(status_for(e), error_body(e));
  } catch (const std::exception& e) {
    return json_response(500, Json{{"error", "internal"}, {"message", e.what()}});
  }
}

void Service::listen(const std::string& host, int port) {
  auto& server = impl_->server;
  auto adapter = [this](const httplib::Request& in, httplib::Response& out) {
    HttpRequest req;
    req.method = in.method;
    req.path = in.path;
    for (const auto& [k, v] : in.params) req.query[k] = v;
    for (const auto& [k, v] : in.headers) {
      std::string name = k;
      for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      req.headers[name] = v;
    }
    req.body = in.body;
    const HttpResponse r = handle(req);
    out.status = r.status;
    for (const auto& [k, v] : r.headers) out.set_header(k, v);
    out.set_content(r.body, r.content_type);
  };
  server.Get(".*", adapter);
  server.Post(".*", adapter);
  server.Delete(".*", adapter);
  if (port == 0) {
    const int bound = server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorKind::io, "cannot bind " + host);
    impl_->port = bound;
    server.listen_after_bind();
  } else {
    if (!server.bind_to_port(host, port)) {
      throw Error(ErrorKind::io, "cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->port = port;
    server.listen_after_bind();
  }
}

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

int Service::bound_port() const { return impl_->port; }

bool Service::wait_until_listening(std::chrono::milliseconds timeout) const {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (impl_->server.is_running() && impl_->port > 0) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return false;
}

}  // namespace cqs
