#include "resid/oracle.hpp"

#include "resid/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace resid::oracle {

ModelFamilySpec pythia_like_family() {
  ModelFamilySpec fam;
  const double params[] = {18'915'328.0,  85'056'000.0,    302'311'424.0,  805'736'448.0,
                           1'208'602'624.0, 2'517'652'480.0, 6'444'163'072.0};
  for (double p : params) fam.sizes.push_back(std::log(p));
  fam.labels = {"70m", "160m", "410m", "1b", "1.4b", "2.8b", "6.9b"};
  return fam;
}

double MixtureFamily::lambda(double s) const {
  return std::clamp(std::exp(-mix_rate * (s - s_ref)), 0.0, 1.0);
}

TokenDistribution MixtureFamily::distribution_at(double s) const {
  const double l = lambda(s);
  const double uniform = 1.0 / static_cast<double>(ideal.size());
  std::vector<double> p(ideal.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = l * uniform + (1.0 - l) * ideal[i];
  return normalize(p);
}

double family_entropy(const MixtureFamily& fam, double s) {
  return entropy(fam.distribution_at(s));
}

TokenDistribution random_dirichlet(std::size_t support, Rng& rng) {
  if (support == 0) throw ParameterError("Dirichlet support must be >= 1");
  std::vector<double> w(support);
  // Dirichlet(1) is a normalized vector of Exp(1) draws.
  for (double& x : w) x = -std::log1p(-uniform01(rng)) + 1e-300;
  return normalize(w);
}

namespace {

std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
}

TokenDistribution random_ideal(std::size_t vocab, std::size_t min_support, std::size_t max_support,
                               Rng& rng) {
  const std::size_t support = uniform_int(rng, min_support, std::min(max_support, vocab));
  const TokenDistribution head = random_dirichlet(support, rng);
  std::vector<double> p(vocab, 0.0);
  std::copy(head.probs().begin(), head.probs().end(), p.begin());
  return TokenDistribution(std::move(p));
}

}  // namespace

std::vector<OracleProfile> generate_profiles(const MixtureSuiteConfig& config, std::size_t contexts,
                                             double noise_sd, std::uint64_t seed) {
  config.family.validate();
  if (contexts < 1) throw ParameterError("need at least one context");
  if (!(noise_sd >= 0.0)) throw ParameterError("noise_sd must be >= 0");
  if (config.min_support < 1 || config.min_support > config.max_support) {
    throw ParameterError("support range is empty");
  }
  if (config.vocab_size < 1) throw ParameterError("vocab_size must be >= 1");

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<OracleProfile> out;
  out.reserve(contexts);
  for (std::size_t c = 0; c < contexts; ++c) {
    MixtureFamily fam{random_ideal(config.vocab_size, config.min_support, config.max_support, rng),
                      config.mix_rate, config.s_ref, config.family};
    EntropyProfile prof;
    prof.context_id = "ctx" + std::to_string(c);
    prof.position = 0;
    for (double s : config.family.sizes) {
      double e = family_entropy(fam, s);
      if (noise_sd > 0.0) e = std::max(0.0, e + noise_sd * noise(rng));
      prof.entropies.push_back(e);
    }
    out.push_back({std::move(prof), fam.asymptotic_entropy()});
  }
  return out;
}

SeparableCase make_separable_case(double g, const TokenDistribution& factual,
                                  const TokenDistribution& hallucination) {
  if (!(g > 0.0 && g <= 1.0)) throw ParameterError("ideal threshold g must lie in (0, 1]");
  const double min_factual = *std::min_element(factual.probs().begin(), factual.probs().end());
  const double max_tail = *std::max_element(hallucination.probs().begin(), hallucination.probs().end());
  if (!(g * min_factual >= (1.0 - g) * max_tail)) {
    throw SeparabilityError("g * min(factual) < (1 - g) * max(hallucination)");
  }
  if (g == 1.0) return {g, factual, hallucination, factual, 0.0};

  std::vector<double> composite;
  composite.reserve(factual.size() + hallucination.size());
  for (double p : factual.probs()) composite.push_back(g * p);
  for (double p : hallucination.probs()) composite.push_back((1.0 - g) * p);
  TokenDistribution joint(std::move(composite));
  const double d_re = entropy(joint) - entropy(factual);
  return {g, factual, hallucination, std::move(joint), d_re};
}

double check_theorem_bound(const SeparableCase& c, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("temperature must be > 0");
  return std::pow(c.g, 1.0 / temperature) - std::exp(-c.d_re_exact / temperature);
}

SeparableCase random_separable_case(Rng& rng) {
  for (;;) {
    const double g = 0.3 + 0.69 * uniform01(rng);
    const TokenDistribution factual = random_dirichlet(uniform_int(rng, 1, 16), rng);
    const TokenDistribution tail = random_dirichlet(uniform_int(rng, 1, 64), rng);
    const double min_factual = *std::min_element(factual.probs().begin(), factual.probs().end());
    const double max_tail = *std::max_element(tail.probs().begin(), tail.probs().end());
    if (g * min_factual >= (1.0 - g) * max_tail) return make_separable_case(g, factual, tail);
  }
}

TheoremSweepResult theorem_sweep(std::size_t cases, const std::vector<double>& temperatures,
                                 std::uint64_t seed, double tolerance) {
  TheoremSweepResult res;
  res.min_margin = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    const SeparableCase c = random_separable_case(rng);
    ++res.cases;
    for (double t : temperatures) {
      const double margin = check_theorem_bound(c, t);
      ++res.checks;
      res.min_margin = std::min(res.min_margin, margin);
      if (margin < -tolerance) ++res.violations;
    }
  }
  return res;
}

std::vector<detect::LabeledSpan> generate_detection_suite(const DetectionSuiteConfig& config,
                                                          std::uint64_t seed) {
  config.family.validate();
  if (config.spans < 1 || config.tokens_per_span < 1) throw ParameterError("empty detection suite");
  Rng rng(seed);
  std::vector<detect::LabeledSpan> spans;
  spans.reserve(config.spans);
  for (std::size_t k = 0; k < config.spans; ++k) {
    detect::LabeledSpan span;
    span.context_id = "span" + std::to_string(k);
    span.label = uniform01(rng) < config.nonfactual_fraction ? detect::Label::nonfactual
                                                             : detect::Label::factual;
    span.begin = 0;
    span.end = static_cast<std::int64_t>(config.tokens_per_span);
    const double rate = span.label == detect::Label::nonfactual ? config.nonfactual_mix_rate
                                                                : config.factual_mix_rate;
    for (std::size_t t = 0; t < config.tokens_per_span; ++t) {
      MixtureFamily fam{random_ideal(config.vocab_size, 1, config.max_support, rng), rate,
                        config.s_ref, config.family};
      const TokenId realized = sample(fam.ideal, rng);
      EntropyProfile prof;
      prof.context_id = span.context_id;
      prof.position = static_cast<std::int64_t>(t);
      std::vector<double> surprisal;
      for (double s : config.family.sizes) {
        const TokenDistribution d = fam.distribution_at(s);
        prof.entropies.push_back(entropy(d));
        surprisal.push_back(-std::log(d[realized]));
      }
      prof.surprisals = std::move(surprisal);
      span.profiles.push_back(std::move(prof));
    }
    spans.push_back(std::move(span));
  }
  return spans;
}

}  // namespace resid::oracle
