#include "resid/metrics.hpp"

#include "resid/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <tuple>

namespace resid::metrics {

void Corpus::validate() const {
  for (const auto& p : prompts) {
    for (const auto& g : p.generations) {
      if (g.empty()) throw DataError("prompt " + p.prompt_id + " has an empty generation");
    }
  }
}

namespace {

using NGram = std::vector<std::int64_t>;

}  // namespace

double distinct_n(const Corpus& corpus, int n) {
  if (n < 1) throw ParameterError("n must be >= 1");
  corpus.validate();
  const auto len = static_cast<std::size_t>(n);
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& prompt : corpus.prompts) {
    std::set<NGram> unique;
    std::size_t total = 0;
    for (const auto& seq : prompt.generations) {
      if (seq.size() < len) continue;
      for (std::size_t i = 0; i + len <= seq.size(); ++i) {
        unique.emplace(seq.begin() + static_cast<std::ptrdiff_t>(i),
                       seq.begin() + static_cast<std::ptrdiff_t>(i + len));
        ++total;
      }
    }
    if (total == 0) continue;
    sum += static_cast<double>(unique.size()) / static_cast<double>(total);
    ++counted;
  }
  if (counted == 0) throw UndefinedMetric("no generation is long enough for distinct-" + std::to_string(n));
  return sum / static_cast<double>(counted);
}

double repetition_ratio(const Corpus& corpus, int n) {
  if (n < 1) throw ParameterError("n must be >= 1");
  corpus.validate();
  const auto len = static_cast<std::size_t>(n);
  std::size_t generations = 0;
  std::size_t repetitive = 0;
  for (const auto& prompt : corpus.prompts) {
    for (const auto& seq : prompt.generations) {
      ++generations;
      std::set<NGram> seen;
      for (std::size_t i = 0; i + len <= seq.size(); ++i) {
        const bool inserted = seen.emplace(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                           seq.begin() + static_cast<std::ptrdiff_t>(i + len))
                                  .second;
        if (!inserted) {
          ++repetitive;
          break;
        }
      }
    }
  }
  if (generations == 0) return 0.0;
  return static_cast<double>(repetitive) / static_cast<double>(generations);
}

RegressionReport regression_report(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw ShapeError("predicted and actual differ in length");
  if (predicted.empty()) throw ShapeError("regression report over empty vectors");
  const auto n = static_cast<double>(actual.size());
  double mean_p = 0.0;
  double mean_a = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    mean_p += predicted[i];
    mean_a += actual[i];
  }
  mean_p /= n;
  mean_a /= n;

  RegressionReport rep;
  double sxy = 0.0, sxx = 0.0, syy = 0.0, ss_res = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double dp = predicted[i] - mean_p;
    const double da = actual[i] - mean_a;
    const double err = predicted[i] - actual[i];
    sxy += dp * da;
    sxx += dp * dp;
    syy += da * da;
    ss_res += err * err;
    l1 += std::abs(err);
  }
  rep.mse = ss_res / n;
  rep.mean_l1 = l1 / n;
  if (syy > 0.0) rep.r2 = 1.0 - ss_res / syy;
  if (sxx > 0.0 && syy > 0.0) rep.pearson_r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return rep;
}

std::string metric_key(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return key;
}

std::vector<Aggregate> minmax_aggregate(const std::vector<ScoreRow>& rows) {
  // (model, prompt_type, metric) -> method -> value
  std::map<std::tuple<std::string, std::string, std::string>, std::map<std::string, double>> groups;
  for (const auto& r : rows) {
    if (!std::isfinite(r.value)) throw DataError("non-finite score for method " + r.method);
    groups[{r.model, r.prompt_type, metric_key(r.metric)}][r.method] = r.value;
  }

  // (model, method, metric) -> normalized values over prompt types
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> normalized;
  for (const auto& [key, by_method] : groups) {
    const auto& [model, prompt_type, metric] = key;
    if (by_method.size() < 2) {
      throw DataError("max-min normalization of " + metric + " for model " + model + ", prompt type " +
                      prompt_type + " needs at least two methods");
    }
    double lo = by_method.begin()->second;
    double hi = lo;
    for (const auto& [m, v] : by_method) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    for (const auto& [m, v] : by_method) {
      const double n = hi > lo ? (v - lo) / (hi - lo) : 0.5;
      normalized[{model, m, metric}].push_back(n);
    }
  }

  auto mean_of = [&](const std::string& model, const std::string& method,
                     const std::string& metric) -> std::optional<double> {
    auto it = normalized.find({model, method, metric});
    if (it == normalized.end() || it->second.empty()) return std::nullopt;
    double s = 0.0;
    for (double v : it->second) s += v;
    return s / static_cast<double>(it->second.size());
  };

  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& [key, v] : normalized) pairs.emplace(std::get<0>(key), std::get<1>(key));

  std::vector<Aggregate> out;
  for (const auto& [model, method] : pairs) {
    Aggregate a{model, method, std::nullopt, std::nullopt};
    const auto entail = mean_of(model, method, "entailr");
    const auto ne = mean_of(model, method, "neer");
    const auto dist2 = mean_of(model, method, "dist2");
    const auto rep = mean_of(model, method, "rep");
    if (entail && ne) a.factuality = *entail - *ne;
    if (dist2 && rep) a.diversity = *dist2 - *rep;
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace resid::metrics
