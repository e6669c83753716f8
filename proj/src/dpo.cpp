#include "cqs/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cqs {
namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double logit_unchecked(const SequenceLogProbs& ex, double beta) {
  const double dw = sum(ex.policy_chosen) - sum(ex.ref_chosen);
  const double dl = sum(ex.policy_rejected) - sum(ex.ref_rejected);
  return beta * (dw - dl);
}

void check_beta(const DpoConfig& cfg) {
  if (!(cfg.beta > 0.0) || !std::isfinite(cfg.beta)) {
    throw Error(ErrorKind::invalid_argument, "beta must be a finite number > 0");
  }
}

}  // namespace

void validate_example(const SequenceLogProbs& ex) {
  if (ex.policy_chosen.size() != ex.ref_chosen.size()) {
    throw Error(ErrorKind::invalid_argument, "chosen policy/reference length mismatch");
  }
  if (ex.policy_rejected.size() != ex.ref_rejected.size()) {
    throw Error(ErrorKind::invalid_argument, "rejected policy/reference length mismatch");
  }
  for (const auto* v : {&ex.policy_chosen, &ex.ref_chosen, &ex.policy_rejected, &ex.ref_rejected}) {
    for (double x : *v) {
      if (!std::isfinite(x)) throw Error(ErrorKind::invalid_argument, "non-finite log-probability");
      if (x > 0.0) throw Error(ErrorKind::invalid_argument, "log-probability above 0");
    }
  }
}

double softplus_neg(double z) {
  if (z > 0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

double sigmoid_neg(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

double dpo_logit(const SequenceLogProbs& ex, const DpoConfig& cfg) {
  check_beta(cfg);
  validate_example(ex);
  return logit_unchecked(ex, cfg.beta);
}

DpoLoss dpo_loss(const std::vector<SequenceLogProbs>& batch, const DpoConfig& cfg) {
  if (batch.empty()) throw Error(ErrorKind::invalid_argument, "empty batch");
  DpoLoss out;
  out.per_example.reserve(batch.size());
  for (const auto& ex : batch) out.per_example.push_back(softplus_neg(dpo_logit(ex, cfg)));
  out.mean_loss = sum(out.per_example) / static_cast<double>(batch.size());
  return out;
}

DpoGrad dpo_grad(const SequenceLogProbs& ex, const DpoConfig& cfg) {
  const double g = cfg.beta * sigmoid_neg(dpo_logit(ex, cfg));
  DpoGrad out;
  out.policy_chosen.assign(ex.policy_chosen.size(), -g);
  out.policy_rejected.assign(ex.policy_rejected.size(), g);
  out.ref_chosen.assign(ex.ref_chosen.size(), 0.0);
  out.ref_rejected.assign(ex.ref_rejected.size(), 0.0);
  return out;
}

GradCheck finite_difference_check(const SequenceLogProbs& ex, const DpoConfig& cfg, double h) {
  const DpoGrad grad = dpo_grad(ex, cfg);
  GradCheck check;
  SequenceLogProbs probe = ex;
  auto run = [&](std::vector<double>& values, const std::vector<double>& analytic) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = softplus_neg(logit_unchecked(probe, cfg.beta));
      values[i] = saved - h;
      const double down = softplus_neg(logit_unchecked(probe, cfg.beta));
      values[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(analytic[i]), 1e-300});
      check.max_rel_error = std::max(check.max_rel_error, std::abs(fd - analytic[i]) / scale);
      ++check.entries;
    }
  };
  run(probe.policy_chosen, grad.policy_chosen);
  run(probe.policy_rejected, grad.policy_rejected);
  return check;
}

Json to_json(const SequenceLogProbs& ex) {
  return Json{{"policy_chosen", ex.policy_chosen},
              {"ref_chosen", ex.ref_chosen},
              {"policy_rejected", ex.policy_rejected},
              {"ref_rejected", ex.ref_rejected}};
}

SequenceLogProbs logprobs_from_json(const Json& j) {
  SequenceLogProbs ex;
  ex.policy_chosen = j.at("policy_chosen").get<std::vector<double>>();
  ex.ref_chosen = j.at("ref_chosen").get<std::vector<double>>();
  ex.policy_rejected = j.at("policy_rejected").get<std::vector<double>>();
  ex.ref_rejected = j.at("ref_rejected").get<std::vector<double>>();
  return ex;
}

}  // namespace cqs
