#pragma once

// Probability-distribution primitives shared by every sampler.
//
// Conventions:
//  - entropies are in nats and 0 * log(0) is taken as 0;
//  - whenever tokens are ranked, ties on probability are broken by the
//    lower token index, so every truncation is deterministic.

#include "resid/decision.hpp"

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace resid {

using TokenId = std::size_t;
using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from the top 53 bits of one draw. Unlike
// std::uniform_real_distribution this is bit-identical across standard
// library implementations.
double uniform01(Rng& rng);

// A non-empty probability vector over token ids 0..V-1.
class TokenDistribution {
 public:
  // Validates non-negativity, finiteness and unit mass (within 1e-9).
  explicit TokenDistribution(std::vector<double> probs);

  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](TokenId i) const { return probs_[i]; }
  TokenId argmax() const;

  // Indices ordered by descending probability, ascending index on ties.
  std::vector<TokenId> ranked() const;

 private:
  std::vector<double> probs_;
};

class LogitVector {
 public:
  explicit LogitVector(std::vector<double> logits);

  std::span<const double> values() const { return logits_; }
  std::size_t size() const { return logits_.size(); }
  double operator[](TokenId i) const { return logits_[i]; }

 private:
  std::vector<double> logits_;
};

// Result of one truncation: which tokens survived and the renormalized
// distribution over them (full vocabulary length, zeros elsewhere).
struct ThresholdDecision {
  double effective_threshold = 1.0;
  std::vector<TokenId> kept;  // in rank order
  TokenDistribution dist;
  DecisionTrace trace;

  std::size_t kept_count() const { return kept.size(); }
};

TokenDistribution normalize(std::span<const double> weights);

double entropy(const TokenDistribution& dist);

// Nucleus truncation: keep the longest ranked prefix whose cumulative mass
// stays <= threshold, but never fewer than one token.
ThresholdDecision truncate_top_p(const TokenDistribution& dist, double threshold);

// Keeps the k most probable tokens. Fractional k is rounded half-up and
// floored at 1; k >= V is the identity.
ThresholdDecision truncate_top_k(const TokenDistribution& dist, double k);

// Keeps exactly `kept` (any order, non-empty) and renormalizes.
ThresholdDecision restrict_to(const TokenDistribution& dist, std::vector<TokenId> kept,
                              double effective_threshold);

TokenDistribution softmax(std::span<const double> logits);
TokenDistribution apply_temperature(const LogitVector& logits, double tau);

TokenId sample(const TokenDistribution& dist, Rng& rng);

}  // namespace resid
