#include "resid/sampler.hpp"

#include "resid/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace resid {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::top_p: return "top_p";
    case Method::top_k: return "top_k";
    case Method::temperature: return "temperature";
    case Method::eta: return "eta";
    case Method::typical: return "typical";
    case Method::factual: return "factual";
    case Method::real: return "real";
    case Method::real_cd: return "real_cd";
    case Method::real_top_k: return "real_top_k";
    case Method::real_f: return "real_f";
    case Method::cd: return "cd";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::top_p, Method::top_k, Method::temperature, Method::eta, Method::typical,
                   Method::factual, Method::real, Method::real_cd, Method::real_top_k, Method::real_f,
                   Method::cd}) {
    if (to_string(m) == name) return m;
  }
  throw UsageError("unknown sampling method '" + std::string(name) + "'");
}

namespace {

bool uses_curve(Method m) {
  return m == Method::real || m == Method::real_cd || m == Method::real_top_k || m == Method::real_f;
}

bool uses_amateur(Method m) { return m == Method::real_cd || m == Method::cd; }

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void SamplerConfig::validate() const {
  if (tau) require(*tau > 0.0 && std::isfinite(*tau), "tau must be > 0");
  switch (method) {
    case Method::top_p:
      require(t_p >= 0.0 && t_p <= 1.0, "p must lie in [0, 1]");
      break;
    case Method::top_k:
    case Method::real_top_k:
      require(t_k >= 1.0 && std::isfinite(t_k), "k must be >= 1");
      break;
    case Method::eta:
      require(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1)");
      break;
    case Method::typical:
      require(typical_mass > 0.0 && typical_mass <= 1.0, "typical mass must lie in (0, 1]");
      break;
    case Method::cd:
      require(cd_alpha >= 0.0 && cd_alpha <= 1.0, "alpha must lie in [0, 1]");
      break;
    case Method::factual:
      require(f_lambda > 0.0 && f_lambda < 1.0, "factual decay must lie in (0, 1)");
      require(f_lower >= 0.0 && f_lower <= f_upper && f_upper <= 1.0, "factual bounds must satisfy 0 <= lower <= upper <= 1");
      break;
    case Method::temperature:
      break;
    case Method::real:
    case Method::real_cd:
    case Method::real_f:
      break;
  }
  if (uses_curve(method)) {
    require(real_temperature > 0.0 && std::isfinite(real_temperature), "T must be > 0");
  }
}

double real_threshold(double d_re, double temperature) {
  if (!(d_re >= 0.0)) throw ParameterError("residual entropy must be >= 0");
  if (!(temperature > 0.0)) throw ParameterError("REAL temperature must be > 0");
  return std::exp(-d_re / temperature);
}

double factual_threshold(const DecodeState& state, double upper, double decay, double lower) {
  const auto x = std::max<std::int64_t>(state.tokens_since_period, 1);
  return std::max(lower, upper * std::pow(decay, static_cast<double>(x - 1)));
}

double real_f_threshold(const DecodeState& state, double d_re, double temperature) {
  const auto x = std::max<std::int64_t>(state.tokens_since_period, 1);
  return std::max(0.3, std::pow(0.9, static_cast<double>(x - 1))) * real_threshold(d_re, temperature);
}

double real_top_k_threshold(double t_k, double d_re) {
  if (!(t_k >= 1.0)) throw ParameterError("t_k must be >= 1");
  if (!(d_re >= 0.0)) throw ParameterError("residual entropy must be >= 0");
  return t_k * std::exp(-d_re);
}

ThresholdDecision eta_truncate(const TokenDistribution& dist, double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw ParameterError("eta must lie in (0, 1)");
  const double cutoff = std::min(eta, std::sqrt(eta) * std::exp(-entropy(dist)));
  std::vector<TokenId> kept;
  for (TokenId t : dist.ranked()) {
    if (dist[t] >= cutoff) kept.push_back(t);
  }
  if (kept.empty()) kept.push_back(dist.argmax());
  auto d = restrict_to(dist, std::move(kept), cutoff);
  d.trace.raw_threshold = eta;
  d.trace.method = Method::eta;
  return d;
}

ThresholdDecision typical_truncate(const TokenDistribution& dist, double mass) {
  if (!(mass > 0.0 && mass <= 1.0)) throw ParameterError("typical mass must lie in (0, 1]");
  const double h = entropy(dist);
  // Scores are compared on a 1e-10 grid so that exactly-typical tokens
  // (uniform distributions) tie despite rounding in the entropy.
  std::vector<std::int64_t> key(dist.size());
  for (TokenId t = 0; t < dist.size(); ++t) {
    key[t] = dist[t] > 0.0 ? std::llround(std::abs(-std::log(dist[t]) - h) * 1e10)
                           : std::numeric_limits<std::int64_t>::max();
  }
  std::vector<TokenId> order(dist.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    if (key[a] != key[b]) return key[a] < key[b];
    return dist[a] > dist[b];
  });
  std::vector<TokenId> kept;
  double cumulative = 0.0;
  for (TokenId t : order) {
    kept.push_back(t);
    cumulative += dist[t];
    if (cumulative >= mass - 1e-12) break;
  }
  auto d = restrict_to(dist, std::move(kept), mass);
  d.trace.raw_threshold = mass;
  d.trace.method = Method::typical;
  return d;
}

TokenDistribution contrastive_adjust(const LogitVector& expert, const LogitVector& amateur,
                                     const std::vector<TokenId>& kept) {
  if (expert.size() != amateur.size()) throw ShapeError("expert and amateur logits differ in length");
  if (kept.empty()) throw ParameterError("contrastive adjustment needs a non-empty kept set");
  double peak = -std::numeric_limits<double>::infinity();
  for (TokenId t : kept) {
    if (t >= expert.size()) throw ShapeError("kept token index out of range");
    peak = std::max(peak, expert[t] - amateur[t]);
  }
  std::vector<double> w(expert.size(), 0.0);
  double total = 0.0;
  for (TokenId t : kept) {
    w[t] = std::exp(expert[t] - amateur[t] - peak);
    total += w[t];
  }
  for (double& x : w) x /= total;
  return TokenDistribution(std::move(w));
}

std::vector<TokenId> cd_plausibility_set(const TokenDistribution& expert, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in [0, 1]");
  const double cutoff = alpha * expert[expert.argmax()];
  std::vector<TokenId> kept;
  for (TokenId t = 0; t < expert.size(); ++t) {
    if (expert[t] >= cutoff) kept.push_back(t);
  }
  return kept;
}

StepResult decode_step(const SamplerConfig& config, const StepInputs& in, DecodeState& state) {
  config.validate();
  const Method method = config.method;
  if (uses_curve(method)) {
    require(in.curve != nullptr && in.family != nullptr, "REAL methods need a decay curve and model family");
  }
  if (uses_amateur(method)) require(in.amateur != nullptr, "contrastive methods need amateur logits");

  const TokenDistribution expert_dist =
      config.tau ? apply_temperature(in.expert, *config.tau) : softmax(in.expert.values());
  const double d_re = uses_curve(method) ? residual_entropy(*in.curve, in.family->largest()) : 0.0;

  // Expert logits entering the contrast carry the same softmax temperature.
  auto contrast = [&](const std::vector<TokenId>& kept) {
    if (!config.tau) return contrastive_adjust(in.expert, *in.amateur, kept);
    std::vector<double> scaled(in.expert.values().begin(), in.expert.values().end());
    for (double& v : scaled) v /= *config.tau;
    return contrastive_adjust(LogitVector(std::move(scaled)), *in.amateur, kept);
  };

  double raw = 0.0;
  auto decision = [&]() -> ThresholdDecision {
    switch (method) {
      case Method::top_p:
        raw = config.t_p;
        return truncate_top_p(expert_dist, raw);
      case Method::top_k:
        raw = config.t_k;
        return truncate_top_k(expert_dist, raw);
      case Method::temperature: {
        raw = config.tau.value_or(1.0);
        return truncate_top_p(expert_dist, 1.0);
      }
      case Method::eta:
        raw = config.eta;
        return eta_truncate(expert_dist, raw);
      case Method::typical:
        raw = config.typical_mass;
        return typical_truncate(expert_dist, raw);
      case Method::factual:
        raw = factual_threshold(state, config.f_upper, config.f_lambda, config.f_lower);
        return truncate_top_p(expert_dist, raw);
      case Method::real:
        raw = real_threshold(d_re, config.real_temperature);
        return truncate_top_p(expert_dist, raw);
      case Method::real_f:
        raw = real_f_threshold(state, d_re, config.real_temperature);
        return truncate_top_p(expert_dist, raw);
      case Method::real_top_k:
        raw = real_top_k_threshold(config.t_k, d_re);
        return truncate_top_k(expert_dist, raw);
      case Method::real_cd: {
        raw = real_threshold(d_re, config.real_temperature);
        auto d = truncate_top_p(expert_dist, raw);
        d.dist = contrast(d.kept);
        return d;
      }
      case Method::cd: {
        raw = config.cd_alpha;
        auto kept = cd_plausibility_set(expert_dist, config.cd_alpha);
        const double cutoff = config.cd_alpha * expert_dist[expert_dist.argmax()];
        auto dist = contrast(kept);
        return ThresholdDecision{cutoff, std::move(kept), std::move(dist), {}};
      }
    }
    throw ConfigError("unhandled sampling method");
  }();
  decision.trace = DecisionTrace{d_re, raw, method};

  const TokenId token = sample(decision.dist, state.rng);
  if (config.terminal_tokens.contains(token)) {
    state.tokens_since_period = 1;
  } else {
    ++state.tokens_since_period;
  }
  return {token, std::move(decision)};
}

}  // namespace resid
