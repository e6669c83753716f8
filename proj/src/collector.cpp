#include "cqs/collector.hpp"

#include <exception>
#include <future>

#include "cqs/prompts.hpp"

namespace cqs {

std::vector<IssueTag> default_tags() {
  std::vector<IssueTag> tags;
  for (const auto& info : canonical_tags()) tags.emplace_back(info.tag);
  return tags;
}

ChatRequest build_collector_prompt(const Diff& diff, const DiffMeta& meta,
                                   const std::vector<IssueTag>& tags) {
  ChatRequest req;
  req.system = std::string(prompts::kCollectorSystem);
  req.user = prompts::collector(render_numbered(diff), meta, tags.empty() ? default_tags() : tags);
  return req;
}

Review collect(const Gateway& gateway, const Diff& diff, const CollectOptions& opts, int sample_index,
               std::optional<std::uint64_t> seed) {
  ChatRequest req = build_collector_prompt(diff, diff.meta, opts.tags);
  req.temperature = opts.temperature;
  req.max_tokens = opts.max_tokens;
  req.sample_seed = seed;
  const Completion c = gateway.complete(req, opts.backend_id);
  IssueBlocks blocks = parse_issue_blocks(c.text);
  Review review;
  review.diff_id = diff.diff_id;
  review.issues = std::move(blocks.issues);
  review.warnings = blocks.warnings;
  review.provenance = {c.backend_id, opts.temperature, sample_index};
  return review;
}

std::uint64_t sample_seed(std::string_view diff_id, int index, std::uint64_t base) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ base;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (unsigned char c : diff_id) mix(c);
  mix(0);
  for (int b = 0; b < 4; ++b) mix(static_cast<unsigned char>((static_cast<unsigned>(index) >> (8 * b)) & 0xff));
  return h;
}

SampleBatch sample_reviews(const Gateway& gateway, const Diff& diff, int n, double temperature,
                           const CollectOptions& opts, std::uint64_t base_seed) {
  if (n < 1) throw Error(ErrorKind::invalid_argument, "sample count must be >= 1");
  CollectOptions o = opts;
  o.temperature = temperature;
  std::vector<std::future<Review>> pending;
  pending.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    pending.push_back(std::async(std::launch::async, [&gateway, &diff, o, i, base_seed] {
      return collect(gateway, diff, o, i, sample_seed(diff.diff_id, i, base_seed));
    }));
  }
  SampleBatch batch;
  std::exception_ptr first_error;
  for (int i = 0; i < n; ++i) {
    try {
      batch.reviews.push_back(pending[static_cast<std::size_t>(i)].get());
    } catch (const GatewayError& e) {
      batch.failures.push_back({i, e.backend_id(), e.what()});
      if (!first_error) first_error = std::current_exception();
    } catch (const std::exception& e) {
      batch.failures.push_back({i, o.backend_id, e.what()});
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (batch.reviews.empty()) std::rethrow_exception(first_error);
  return batch;
}

}  // namespace cqs
