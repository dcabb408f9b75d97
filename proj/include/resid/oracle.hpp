#pragma once

// Synthetic ground truth.
//
// Two generators live here:
//  - a model-family simulator whose member at log-size s emits the mixture
//    lambda(s) * Uniform + (1 - lambda(s)) * ideal, so its asymptotic
//    entropy entropy(ideal) is known exactly;
//  - the separable head/tail construction used to machine-check the bound
//    exp(-d_RE / T) <= g^(1/T) whenever d_RE is exact.

#include "resid/decay.hpp"
#include "resid/detect.hpp"
#include "resid/dist.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace resid::oracle {

// Seven sizes at ln(non-embedding parameter count) of a public 70M..6.9B
// decoder family.
ModelFamilySpec pythia_like_family();

struct MixtureFamily {
  TokenDistribution ideal;
  double mix_rate = 1.0;
  double s_ref = 0.0;
  ModelFamilySpec sizes;

  // exp(-mix_rate * (s - s_ref)) clamped to [0, 1].
  double lambda(double s) const;
  TokenDistribution distribution_at(double s) const;
  double asymptotic_entropy() const { return entropy(ideal); }
};

double family_entropy(const MixtureFamily& fam, double s);

struct MixtureSuiteConfig {
  ModelFamilySpec family = pythia_like_family();
  std::size_t vocab_size = 256;
  std::size_t min_support = 1;
  std::size_t max_support = 32;
  double mix_rate = 1.0;
  double s_ref = 16.0;
};

struct OracleProfile {
  EntropyProfile profile;
  double true_asymptote = 0.0;
};

// Per context: a fresh Dirichlet(1) ideal over a random support size, then
// entropies family_entropy(s_i) + N(0, noise_sd), floored at 0.
std::vector<OracleProfile> generate_profiles(const MixtureSuiteConfig& config,
                                             std::size_t contexts, double noise_sd,
                                             std::uint64_t seed);

struct SeparableCase {
  double g = 1.0;
  TokenDistribution factual;
  TokenDistribution hallucination;
  TokenDistribution composite;  // [g * factual, (1 - g) * hallucination]
  double d_re_exact = 0.0;
};

// Throws SeparabilityError unless g * min(factual) >= (1 - g) * max(hallucination).
// g = 1 puts no mass on the tail, so the composite equals `factual`.
SeparableCase make_separable_case(double g, const TokenDistribution& factual,
                                  const TokenDistribution& hallucination);

// g^(1/T) - exp(-d_re_exact / T); never negative for a valid case.
double check_theorem_bound(const SeparableCase& c, double temperature);

// g ~ U(0.3, 0.99), factual ~ Dirichlet over 1..16 tokens, tail ~ Dirichlet
// over 1..64 tokens, resampled until separable.
SeparableCase random_separable_case(Rng& rng);

// Dirichlet(1) draw over `support` tokens.
TokenDistribution random_dirichlet(std::size_t support, Rng& rng);

struct TheoremSweepResult {
  std::size_t cases = 0;
  std::size_t checks = 0;
  std::size_t violations = 0;
  double min_margin = 0.0;
};

TheoremSweepResult theorem_sweep(std::size_t cases, const std::vector<double>& temperatures,
                                 std::uint64_t seed, double tolerance = 1e-9);

struct DetectionSuiteConfig {
  ModelFamilySpec family = pythia_like_family();
  std::size_t spans = 200;
  std::size_t tokens_per_span = 6;
  double nonfactual_fraction = 0.5;
  std::size_t vocab_size = 256;
  std::size_t max_support = 32;
  double factual_mix_rate = 1.5;     // decay nearly finished by the largest size
  double nonfactual_mix_rate = 0.5;  // measured entropy still inflated at the largest size
  double s_ref = 16.0;
};

// Labeled spans whose tokens all draw their ideal (asymptotic) distribution
// from the same prior; nonfactual spans decay more slowly, so their measured
// entropy sits above the shared asymptote by a larger residual.
std::vector<detect::LabeledSpan> generate_detection_suite(const DetectionSuiteConfig& config,
                                                          std::uint64_t seed);

}  // namespace resid::oracle
