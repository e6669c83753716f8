#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cqs/collector.hpp"
#include "cqs/curation.hpp"
#include "cqs/dpo.hpp"
#include "cqs/eval.hpp"
#include "cqs/gateway.hpp"
#include "cqs/judge.hpp"
#include "cqs/validator.hpp"

namespace cqs {

struct ServiceConfig {
  std::string store_dir = "cqs-store";
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct AppConfig {
  std::vector<BackendConfig> backends;  // empty means one heuristic backend
  CollectOptions collect;
  int samples = kDefaultSamples;
  double sample_temperature = kDefaultSampleTemperature;
  JudgeOptions judge;
  FilterConfig filter;
  int delta = 3;
  DpoConfig dpo;
  CurationOptions curation;
  MatchConfig match;
  int eval_runs = kDefaultEvalRuns;
  int accuracy_threshold = kDefaultAccuracyThreshold;
  ServiceConfig service;
};

// INI text. Sections: [backend.<id>], [collect], [judge], [filter],
// [filter.tags] (keys "<Tag>/<language>" or "<Tag>/*"), [pairs], [dpo],
// [curation], [eval], [service]. Unknown sections or keys are errors.
AppConfig parse_config(const std::string& text);
AppConfig load_config(const std::string& path);

std::unique_ptr<Gateway> make_gateway(const AppConfig& cfg);

}  // namespace cqs
