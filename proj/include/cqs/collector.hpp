#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cqs/diff.hpp"
#include "cqs/gateway.hpp"

namespace cqs {

struct CollectOptions {
  std::string backend_id = "heuristic";
  double temperature = 0.0;
  int max_tokens = 2048;
  std::vector<IssueTag> tags;  // empty means the twelve canonical tags
};

std::vector<IssueTag> default_tags();

ChatRequest build_collector_prompt(const Diff& diff, const DiffMeta& meta,
                                   const std::vector<IssueTag>& tags);

// One collector call. Unparseable blocks are dropped and counted in
// Review::warnings; gateway errors propagate.
Review collect(const Gateway& gateway, const Diff& diff, const CollectOptions& opts,
               int sample_index = 0, std::optional<std::uint64_t> seed = std::nullopt);

// Seed for sample `index` of a diff; `base` lets a caller reseed a whole run.
std::uint64_t sample_seed(std::string_view diff_id, int index, std::uint64_t base = 0);

struct SampleFailure {
  int sample_index = 0;
  std::string backend_id;
  std::string message;
};

struct SampleBatch {
  std::vector<Review> reviews;  // ascending sample_index
  std::vector<SampleFailure> failures;
};

inline constexpr int kDefaultSamples = 10;
inline constexpr double kDefaultSampleTemperature = 1.0;

// n concurrent collector calls with distinct seeds. Throws the first error
// when every call fails.
SampleBatch sample_reviews(const Gateway& gateway, const Diff& diff, int n, double temperature,
                           const CollectOptions& opts, std::uint64_t base_seed = 0);

}  // namespace cqs
