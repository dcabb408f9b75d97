#include "resid/dist.hpp"

#include "resid/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace resid {

namespace {

// Slack on cumulative-mass comparisons so a prefix that sums to exactly the
// threshold in real arithmetic is not lost to rounding.
constexpr double kMassSlack = 1e-12;

}  // namespace

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

TokenDistribution::TokenDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidDistribution("distribution is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const double p = probs_[i];
    if (!std::isfinite(p) || p < 0.0) {
      throw InvalidDistribution("probability at index " + std::to_string(i) +
                                " is negative or non-finite");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidDistribution("probabilities sum to " + std::to_string(total) + ", not 1");
  }
}

TokenId TokenDistribution::argmax() const {
  // max_element returns the first maximum, which is the lowest index.
  return static_cast<TokenId>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

std::vector<TokenId> TokenDistribution::ranked() const {
  std::vector<TokenId> order(probs_.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::stable_sort(order.begin(), order.end(),
                   [this](TokenId a, TokenId b) { return probs_[a] > probs_[b]; });
  return order;
}

LogitVector::LogitVector(std::vector<double> logits) : logits_(std::move(logits)) {
  if (logits_.empty()) throw InvalidDistribution("logit vector is empty");
  for (std::size_t i = 0; i < logits_.size(); ++i) {
    if (!std::isfinite(logits_[i])) {
      throw InvalidDistribution("logit at index " + std::to_string(i) + " is not finite");
    }
  }
}

TokenDistribution normalize(std::span<const double> weights) {
  if (weights.empty()) throw InvalidDistribution("cannot normalize an empty vector");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidDistribution("weights must be finite and non-negative");
    }
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw InvalidDistribution("weights have no positive mass");
  }
  std::vector<double> probs(weights.begin(), weights.end());
  for (double& p : probs) p /= total;
  return TokenDistribution(std::move(probs));
}

double entropy(const TokenDistribution& dist) {
  double h = 0.0;
  for (double p : dist.probs()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

ThresholdDecision restrict_to(const TokenDistribution& dist, std::vector<TokenId> kept,
                              double effective_threshold) {
  if (kept.empty()) throw ParameterError("kept token set is empty");
  if (kept.size() == dist.size()) {
    return ThresholdDecision{effective_threshold, std::move(kept), dist, {}};
  }
  double mass = 0.0;
  for (TokenId t : kept) {
    if (t >= dist.size()) throw ShapeError("kept token index out of range");
    mass += dist[t];
  }
  std::vector<double> probs(dist.size(), 0.0);
  if (mass > 0.0) {
    for (TokenId t : kept) probs[t] = dist[t] / mass;
  } else {
    // Every kept token has zero mass; fall back to uniform over the set.
    for (TokenId t : kept) probs[t] = 1.0 / static_cast<double>(kept.size());
  }
  return ThresholdDecision{effective_threshold, std::move(kept), TokenDistribution(std::move(probs)),
                           {}};
}

ThresholdDecision truncate_top_p(const TokenDistribution& dist, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ParameterError("top-p threshold must lie in [0, 1]");
  }
  const auto order = dist.ranked();
  double cumulative = 0.0;
  std::size_t keep = 0;
  for (TokenId t : order) {
    if (cumulative + dist[t] > threshold + kMassSlack) break;
    cumulative += dist[t];
    ++keep;
  }
  keep = std::max<std::size_t>(keep, 1);
  auto decision = restrict_to(dist, {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep)},
                              threshold);
  decision.trace.raw_threshold = threshold;
  decision.trace.method = Method::top_p;
  return decision;
}

ThresholdDecision truncate_top_k(const TokenDistribution& dist, double k) {
  if (!std::isfinite(k)) throw ParameterError("top-k size must be finite");
  const double rounded = std::max(1.0, std::floor(k + 0.5));
  const std::size_t keep =
      rounded >= static_cast<double>(dist.size()) ? dist.size() : static_cast<std::size_t>(rounded);
  const auto order = dist.ranked();
  auto decision = restrict_to(dist, {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep)},
                              static_cast<double>(keep));
  decision.trace.raw_threshold = k;
  decision.trace.method = Method::top_k;
  return decision;
}

TokenDistribution softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidDistribution("softmax of an empty vector");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp(logits[i] - peak);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return TokenDistribution(std::move(w));
}

TokenDistribution apply_temperature(const LogitVector& logits, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ParameterError("softmax temperature must be positive and finite");
  }
  std::vector<double> scaled(logits.values().begin(), logits.values().end());
  for (double& x : scaled) x /= tau;
  return softmax(scaled);
}

TokenId sample(const TokenDistribution& dist, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  TokenId last_positive = dist.argmax();
  for (TokenId t = 0; t < dist.size(); ++t) {
    const double p = dist[t];
    if (p <= 0.0) continue;
    cumulative += p;
    last_positive = t;
    if (u < cumulative) return t;
  }
  // u landed in the rounding gap above the accumulated mass.
  return last_positive;
}

}  // namespace resid
