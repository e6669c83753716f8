#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cqs/collector.hpp"
#include "cqs/gateway.hpp"
#include "cqs/judge.hpp"
#include "cqs/validator.hpp"

namespace cqs {

using Clock = std::function<std::chrono::system_clock::time_point()>;

// ISO-8601 UTC with second resolution, e.g. 2026-01-02T03:04:05Z.
std::string format_time(std::chrono::system_clock::time_point t);
std::chrono::system_clock::time_point parse_time(std::string_view s);

struct StoredReview {
  std::string review_id;
  Diff diff;
  Review final;
  std::vector<FilterOutcome> audit;
  std::string created_at;

  friend bool operator==(const StoredReview&, const StoredReview&) = default;
};

Json to_json(const StoredReview& r);
StoredReview stored_review_from_json(const Json& j);

struct FeedbackRecord {
  std::string feedback_id;
  std::string review_id;
  int issue_index = 0;
  bool thumbs_up = false;
  std::optional<std::string> comment;
  std::string reviewer_id;
  std::string timestamp;

  friend bool operator==(const FeedbackRecord&, const FeedbackRecord&) = default;
};

Json to_json(const FeedbackRecord& f);
FeedbackRecord feedback_from_json(const Json& j);

struct ServiceOptions {
  std::string store_dir = "cqs-store";
  CollectOptions collect;
  JudgeOptions judge;
  FilterConfig filter;
  Clock clock;  // defaults to the system clock
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
  std::map<std::string, std::string> headers;
};

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

// Review and feedback store over two append-only JSONL logs (reviews.log,
// feedback.log) replayed on construction, plus the HTTP surface.
class Service {
 public:
  Service(const Gateway& gateway, ServiceOptions opts);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Parse, collect, validate, persist. Errors propagate as cqs::Error.
  StoredReview submit_review(std::string_view diff_text, const DiffMeta& meta, std::string diff_id = "");
  std::optional<StoredReview> review(const std::string& review_id) const;
  std::vector<StoredReview> reviews() const;
  bool delete_review(const std::string& review_id);

  // Last write wins per (review, issue index, reviewer). Throws
  // Error(not_found) for an unknown review, Error(invalid_argument) for an
  // index out of range.
  FeedbackRecord record_feedback(const std::string& review_id, int issue_index, bool thumbs_up,
                                 std::optional<std::string> comment, const std::string& reviewer_id);
  std::vector<FeedbackRecord> feedback() const;  // live records in feedback_id order

  struct Export {
    std::string jsonl;
    int rows = 0;
    int orphans = 0;
  };
  Export export_critiques() const;

  Json metrics() const;

  HttpResponse handle(const HttpRequest& req);

  // Blocking HTTP server; returns after stop(). port 0 picks a free port,
  // reported through bound_port() once listening.
  void listen(const std::string& host, int port);
  void stop();
  int bound_port() const;
  bool wait_until_listening(std::chrono::milliseconds timeout) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cqs
