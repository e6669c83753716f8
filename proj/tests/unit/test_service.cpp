#include <gtest/gtest.h>

#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "cqs/curation.hpp"
#include "cqs/service.hpp"
#include "support.hpp"

using namespace cqs;
using namespace std::chrono_literals;

namespace {

const std::string kMeanPatch = cqs_test::new_file_patch(
    "stats.py", {"def mean(values):", "    total = sum(values)", "    count = len(values)", "    return total / count"});

struct FakeClock {
  std::shared_ptr<std::chrono::system_clock::time_point> now =
      std::make_shared<std::chrono::system_clock::time_point>(parse_time("2026-03-01T12:00:00Z"));
  Clock fn() const {
    auto p = now;
    return [p] { return *p; };
  }
  void advance(std::chrono::seconds s) const { *now += s; }
};

ServiceOptions options(const cqs_test::TempDir& dir, const FakeClock& clock) {
  ServiceOptions o;
  o.store_dir = dir.path().string();
  o.clock = clock.fn();
  return o;
}

HttpRequest request(std::string method, std::string path, std::string body = {}) {
  HttpRequest r;
  r.method = std::move(method);
  r.path = std::move(path);
  r.body = std::move(body);
  return r;
}

}  // namespace

TEST(Time, FormatAndParse) {
  const auto t = parse_time("2026-01-02T03:04:05Z");
  EXPECT_EQ(format_time(t), "2026-01-02T03:04:05Z");
  EXPECT_THROW(parse_time("yesterday"), Error);
}

TEST(Store, SubmitViewAndList) {
  cqs_test::TempDir dir;
  FakeClock clock;
  auto gw = make_offline_gateway();
  Service svc(*gw, options(dir, clock));
  const auto r = svc.submit_review(kMeanPatch, {}, "mean");
  EXPECT_EQ(r.review_id, "rev-000001");
  EXPECT_EQ(r.diff.diff_id, "mean");
  EXPECT_EQ(r.created_at, "2026-03-01T12:00:00Z");
  ASSERT_EQ(r.final.issues.size(), 2u);
  EXPECT_EQ(svc.review("rev-000001"), r);
  EXPECT_FALSE(svc.review("rev-999999"));
  const auto r2 = svc.submit_review(kMeanPatch, {});
  EXPECT_EQ(r2.review_id, "rev-000002");
  EXPECT_EQ(r2.diff.diff_id.rfind("diff-", 0), 0u);
  EXPECT_EQ(svc.reviews().size(), 2u);
  try {
    svc.submit_review("not a diff", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::diff_parse);
  }
  EXPECT_EQ(svc.reviews().size(), 2u);
}

TEST(Store, RestartReplaysIdentically) {
  cqs_test::TempDir dir;
  FakeClock clock;
  auto gw = make_offline_gateway();
  std::vector<StoredReview> before;
  std::vector<FeedbackRecord> fb_before;
  std::string export_before;
  {
    Service svc(*gw, options(dir, clock));
    const auto a = svc.submit_review(kMeanPatch, {}, "a");
    svc.submit_review(kMeanPatch, {}, "b");
    const auto c = svc.submit_review(kMeanPatch, {}, "c");
    svc.record_feedback(a.review_id, 0, true, "useful", "ann");
    clock.advance(10s);
    svc.record_feedback(a.review_id, 1, false, std::nullopt, "ann");
    svc.record_feedback(a.review_id, 0, false, "changed my mind", "ann");
    svc.delete_review(c.review_id);
    before = svc.reviews();
    fb_before = svc.feedback();
    export_before = svc.export_critiques().jsonl;
  }
  Service again(*gw, options(dir, clock));
  EXPECT_EQ(again.reviews(), before);
  EXPECT_EQ(again.feedback(), fb_before);
  EXPECT_EQ(again.export_critiques().jsonl, export_before);
  EXPECT_EQ(to_json(again.reviews()[0]).dump(), to_json(before[0]).dump());
  // Ids keep counting after replay, deleted ids are not reused.
  EXPECT_EQ(again.submit_review(kMeanPatch, {}, "d").review_id, "rev-000004");
  EXPECT_EQ(again.record_feedback("rev-000001", 1, true, std::nullopt, "bo").feedback_id, "fb-000004");
}

TEST(Store, FeedbackLastWriteWins) {
  cqs_test::TempDir dir;
  FakeClock clock;
  auto gw = make_offline_gateway();
  Service svc(*gw, options(dir, clock));
  const auto r = svc.submit_review(kMeanPatch, {}, "mean");
  svc.record_feedback(r.review_id, 0, true, "first", "ann");
  svc.record_feedback(r.review_id, 0, false, "second", "ann");
  svc.record_feedback(r.review_id, 0, true, std::nullopt, "bo");
  const auto fb = svc.feedback();
  ASSERT_EQ(fb.size(), 2u);
  EXPECT_EQ(fb[0].feedback_id, "fb-000002");
  EXPECT_EQ(fb[0].comment, "second");
  EXPECT_FALSE(fb[0].thumbs_up);
  EXPECT_EQ(fb[1].reviewer_id, "bo");
  EXPECT_THROW(svc.record_feedback("rev-000404", 0, true, std::nullopt, "ann"), Error);
  EXPECT_THROW(svc.record_feedback(r.review_id, 2, true, std::nullopt, "ann"), Error);
  EXPECT_THROW(svc.record_feedback(r.review_id, -1, true, std::nullopt, "ann"), Error);
  EXPECT_THROW(svc.record_feedback(r.review_id, 0, true, std::nullopt, ""), Error);
}

TEST(Store, ExportSkipsOrphansAndFeedsCuration) {
  cqs_test::TempDir dir;
  FakeClock clock;
  auto gw = make_offline_gateway();
  Service svc(*gw, options(dir, clock));
  const auto kept = svc.submit_review(kMeanPatch, {}, "kept");
  const auto gone = svc.submit_review(kMeanPatch, {}, "gone");
  svc.record_feedback(kept.review_id, 1, true, "an empty list crashes the nightly import job right here", "ann");
  svc.record_feedback(kept.review_id, 0, false, std::nullopt, "bo");
  svc.record_feedback(gone.review_id, 0, true, std::nullopt, "ann");
  ASSERT_TRUE(svc.delete_review(gone.review_id));
  EXPECT_FALSE(svc.delete_review(gone.review_id));

  const auto ex = svc.export_critiques();
  EXPECT_EQ(ex.rows, 2);
  EXPECT_EQ(ex.orphans, 1);
  std::vector<CritiqueInput> inputs;
  std::istringstream lines(ex.jsonl);
  for (std::string line; std::getline(lines, line);) {
    const Json j = Json::parse(line);
    EXPECT_NO_THROW(validate_critique_input(j));
    inputs.push_back(critique_input_from_json(j));
  }
  ASSERT_EQ(inputs.size(), 2u);
  EXPECT_EQ(inputs[0].issue, kept.final.issues[1]);
  EXPECT_EQ(inputs[1].comment, "");
  const auto ds = curate_critiques(*gw, inputs, {});
  EXPECT_EQ(ds.samples.size(), 2u);
  EXPECT_EQ(ds.errors, 0);

  const auto resp = svc.handle(request("GET", "/v1/export/critiques"));
  EXPECT_EQ(resp.status, 200);
  EXPECT_EQ(resp.body, ex.jsonl);
  EXPECT_EQ(resp.headers.at("X-Export-Warnings"), "1");
}

TEST(Store, MetricsHelpfulness) {
  cqs_test::TempDir dir;
  FakeClock clock;
  auto gw = make_offline_gateway();
  Service svc(*gw, options(dir, clock));
  Json m = svc.metrics();
  EXPECT_TRUE(m["helpfulness"].is_null());
  EXPECT_TRUE(m["helpfulness_windows"].empty());
  const auto r = svc.submit_review(kMeanPatch, {}, "mean");
  const std::vector<std::pair<std::string, bool>> votes = {
      {"a", true}, {"b", true}, {"c", true}, {"d", false}, {"e", false}};
  for (const auto& [who, up] : votes) svc.record_feedback(r.review_id, 0, up, std::nullopt, who);
  m = svc.metrics();
  EXPECT_EQ(m["feedback_up"], 3);
  EXPECT_EQ(m["feedback_down"], 2);
  EXPECT_EQ(m["helpfulness"].get<double>(), 0.6);
  EXPECT_EQ(m["reviews_served"], 1);
  int reasons = 0;
  for (const auto& [_, n] : m["dropped_by_reason"].items()) reasons += n.get<int>();
  EXPECT_EQ(reasons, m["issues_dropped"].get<int>());
  EXPECT_EQ(m["issues_kept"].get<int>(), 2);
  ASSERT_EQ(m["helpfulness_windows"].size(), 1u);
  EXPECT_EQ(m["helpfulness_windows"][0]["helpfulness"].get<double>(), 0.6);

  // A vote three weeks later opens new windows; old ones keep their ratio.
  clock.advance(std::chrono::hours(24 * 21));
  svc.record_feedback(r.review_id, 1, false, std::nullopt, "a");
  m = svc.metrics();
  EXPECT_EQ(m["helpfulness_windows"].size(), 4u);
  EXPECT_EQ(m["helpfulness_windows"][0]["helpfulness"].get<double>(), 0.0);
  EXPECT_TRUE(m["helpfulness_windows"][1]["helpfulness"].is_null());
  EXPECT_EQ(m["helpfulness_windows"][3]["helpfulness"].get<double>(), 0.6);
}

TEST(Http, StatusMapping) {
  cqs_test::TempDir dir;
  FakeClock clock;
  auto gw = make_offline_gateway();
  Service svc(*gw, options(dir, clock));
  auto ok = svc.handle(request("POST", "/v1/reviews", kMeanPatch));
  EXPECT_EQ(ok.status, 200);
  const Json view = Json::parse(ok.body);
  EXPECT_EQ(view["review_id"], "rev-000001");
  EXPECT_EQ(view["issues"].size(), 2u);
  EXPECT_FALSE(view.contains("audit"));

  auto get = request("GET", "/v1/reviews/rev-000001");
  get.query["debug"] = "1";
  EXPECT_EQ(Json::parse(svc.handle(get).body)["audit"].size(), 2u);
  EXPECT_EQ(svc.handle(request("GET", "/v1/reviews/rev-000009")).status, 404);
  EXPECT_EQ(svc.handle(request("GET", "/v1/nowhere")).status, 404);
  EXPECT_EQ(svc.handle(request("PUT", "/v1/reviews")).status, 405);

  const auto bad_diff = svc.handle(request("POST", "/v1/reviews", "@@ nonsense"));
  EXPECT_EQ(bad_diff.status, 422);
  EXPECT_EQ(Json::parse(bad_diff.body)["error"], "diff-parse");
  EXPECT_EQ(svc.handle(request("POST", "/v1/reviews", "{\"diff\": 3}")).status, 422);

  const Json with_meta{{"diff", kMeanPatch}, {"diff_id", "named"}, {"meta", {{"title", "Add mean"}}}};
  const auto named = svc.handle(request("POST", "/v1/reviews", with_meta.dump()));
  EXPECT_EQ(named.status, 200);
  EXPECT_EQ(Json::parse(named.body)["diff_id"], "named");

  auto fb = request("POST", "/v1/issues/feedback",
                    Json{{"review_id", "rev-000001"}, {"issue_index", 0}, {"sentiment", "up"}}.dump());
  fb.headers["x-reviewer-id"] = "hdr";
  const auto fb_resp = svc.handle(fb);
  EXPECT_EQ(fb_resp.status, 200);
  EXPECT_EQ(Json::parse(fb_resp.body)["reviewer_id"], "hdr");
  EXPECT_EQ(svc.handle(request("POST", "/v1/issues/feedback",
                               Json{{"review_id", "rev-000001"}, {"issue_index", 5}, {"sentiment", "up"}}.dump()))
                .status,
            422);
  EXPECT_EQ(svc.handle(request("POST", "/v1/issues/feedback",
                               Json{{"review_id", "rev-000077"}, {"issue_index", 0}, {"sentiment", "up"}}.dump()))
                .status,
            404);
  EXPECT_EQ(svc.handle(request("POST", "/v1/issues/feedback",
                               Json{{"review_id", "rev-000001"}, {"issue_index", 0}, {"sentiment", "meh"}}.dump()))
                .status,
            422);
  auto list = request("GET", "/v1/issues/feedback");
  list.query["review_id"] = "rev-000001";
  EXPECT_EQ(Json::parse(svc.handle(list).body)["feedback"].size(), 1u);

  EXPECT_EQ(svc.handle(request("DELETE", "/v1/reviews/rev-000001")).status, 200);
  EXPECT_EQ(svc.handle(request("DELETE", "/v1/reviews/rev-000001")).status, 404);
  EXPECT_EQ(svc.handle(request("GET", "/v1/metrics")).status, 200);
}

TEST(Http, GatewayFailuresAre502) {
  cqs_test::TempDir dir;
  FakeClock clock;
  auto gw = make_offline_gateway();
  ServiceOptions o = options(dir, clock);
  o.collect.backend_id = "missing";
  Service svc(*gw, o);
  const auto resp = svc.handle(request("POST", "/v1/reviews", kMeanPatch));
  EXPECT_EQ(resp.status, 502);
  const Json body = Json::parse(resp.body);
  EXPECT_EQ(body["error"], "unknown-backend");
  EXPECT_EQ(body["backend_id"], "missing");
  EXPECT_TRUE(svc.reviews().empty());
}

TEST(Http, ServesOverTheNetwork) {
  cqs_test::TempDir dir;
  FakeClock clock;
  auto gw = make_offline_gateway();
  Service svc(*gw, options(dir, clock));
  std::thread server([&] { svc.listen("127.0.0.1", 0); });
  ASSERT_TRUE(svc.wait_until_listening(5s));
  httplib::Client client("127.0.0.1", svc.bound_port());
  auto posted = client.Post("/v1/reviews", kMeanPatch, "text/plain");
  ASSERT_TRUE(posted);
  EXPECT_EQ(posted->status, 200);
  auto fb = client.Post("/v1/issues/feedback", httplib::Headers{{"X-Reviewer-Id", "net"}},
                        Json{{"review_id", "rev-000001"}, {"issue_index", 1}, {"sentiment", "down"},
                             {"comment", "fine as is"}}
                            .dump(),
                        "application/json");
  ASSERT_TRUE(fb);
  EXPECT_EQ(Json::parse(fb->body)["reviewer_id"], "net");
  auto ex = client.Get("/v1/export/critiques");
  ASSERT_TRUE(ex);
  EXPECT_EQ(ex->get_header_value("X-Export-Warnings"), "0");
  EXPECT_EQ(ex->body, svc.export_critiques().jsonl);
  auto missing = client.Get("/v1/reviews/rev-000100?debug=1");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  svc.stop();
  server.join();
}
