#pragma once

// Truncation samplers and their compositions with residual-entropy (REAL)
// thresholds and contrastive decoding.

#include "resid/decay.hpp"
#include "resid/decision.hpp"
#include "resid/dist.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace resid {

struct SamplerConfig {
  Method method = Method::top_p;
  double t_p = 0.9;
  double t_k = 40.0;
  double real_temperature = 1.0;         // T in exp(-d_RE / T)
  std::optional<double> tau;             // softmax temperature on expert logits
  double eta = 0.0009;
  double typical_mass = 0.95;
  double cd_alpha = 0.3;
  double f_lambda = 0.9;
  double f_upper = 0.9;
  double f_lower = 0.3;
  std::set<TokenId> terminal_tokens;     // resets the factual-sampling distance

  // Checks only the fields the chosen method reads.
  void validate() const;
};

struct DecodeState {
  std::int64_t tokens_since_period = 1;
  Rng rng;

  explicit DecodeState(std::uint64_t seed) : rng(seed) {}
};

double real_threshold(double d_re, double temperature);
double factual_threshold(const DecodeState& state, double upper = 0.9, double decay = 0.9,
                         double lower = 0.3);
// max(0.3, 0.9^(x-1)) * exp(-d_re / T); the distance factor has no leading 0.9.
double real_f_threshold(const DecodeState& state, double d_re, double temperature);
// t_k * exp(-d_re); the caller rounds and floors at 1 when truncating.
double real_top_k_threshold(double t_k, double d_re);

ThresholdDecision eta_truncate(const TokenDistribution& dist, double eta);
ThresholdDecision typical_truncate(const TokenDistribution& dist, double mass);

// Softmax over `kept` of (expert - amateur); zero outside `kept`.
TokenDistribution contrastive_adjust(const LogitVector& expert, const LogitVector& amateur,
                                     const std::vector<TokenId>& kept);

// Tokens with p >= alpha * max p, in ascending index order.
std::vector<TokenId> cd_plausibility_set(const TokenDistribution& expert, double alpha);

struct StepInputs {
  const LogitVector& expert;
  const LogitVector* amateur = nullptr;
  const DecayCurve* curve = nullptr;
  const ModelFamilySpec* family = nullptr;
};

struct StepResult {
  TokenId token = 0;
  ThresholdDecision decision;
};

// One decoding step. Throws ConfigError when the method needs an input that
// is missing (REAL variants need curve + family; CD variants need amateur).
// Advances state.rng and state.tokens_since_period.
StepResult decode_step(const SamplerConfig& config, const StepInputs& inputs, DecodeState& state);

}  // namespace resid
