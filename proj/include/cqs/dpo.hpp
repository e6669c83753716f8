#pragma once

#include <string_view>
#include <vector>

#include "cqs/core_model.hpp"

namespace cqs {

// Per-token log-probabilities of the chosen and rejected responses under the
// policy and the frozen reference model.
struct SequenceLogProbs {
  std::vector<double> policy_chosen;
  std::vector<double> ref_chosen;
  std::vector<double> policy_rejected;
  std::vector<double> ref_rejected;
};

struct DpoConfig {
  double beta = 0.1;
};

// Finite entries, each <= 0, and policy/reference lengths equal per sequence.
void validate_example(const SequenceLogProbs& ex);

// log(1 + exp(-z)) without overflow for large |z|.
double softplus_neg(double z);
// 1 / (1 + exp(z)).
double sigmoid_neg(double z);

// z = beta * ((sum policy_chosen - sum ref_chosen) - (sum policy_rejected - sum ref_rejected)).
double dpo_logit(const SequenceLogProbs& ex, const DpoConfig& cfg);

struct DpoLoss {
  double mean_loss = 0.0;
  std::vector<double> per_example;
};

DpoLoss dpo_loss(const std::vector<SequenceLogProbs>& batch, const DpoConfig& cfg = {});

// Gradient of one example's loss with respect to every input entry. The
// reference entries are constants of the objective, so theirs are zero.
struct DpoGrad {
  std::vector<double> policy_chosen;
  std::vector<double> policy_rejected;
  std::vector<double> ref_chosen;
  std::vector<double> ref_rejected;
};

DpoGrad dpo_grad(const SequenceLogProbs& ex, const DpoConfig& cfg = {});

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

// Central finite differences over every policy entry.
GradCheck finite_difference_check(const SequenceLogProbs& ex, const DpoConfig& cfg = {}, double h = 1e-5);

Json to_json(const SequenceLogProbs& ex);
SequenceLogProbs logprobs_from_json(const Json& j);

}  // namespace cqs
