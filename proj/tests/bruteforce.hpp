#pragma once

// Independent recomputations of the corpus and regression metrics, written
// from the definitions with different data structures than the library.

#include "resid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace resid::testing {

inline std::string gram_key(const metrics::Sequence& s, std::size_t i, std::size_t n) {
  std::string k;
  for (std::size_t j = i; j < i + n; ++j) k += std::to_string(s[j]) + " ";
  return k;
}

inline std::optional<double> distinct_bruteforce(const metrics::Corpus& c, std::size_t n) {
  std::vector<double> ratios;
  for (const auto& p : c.prompts) {
    std::vector<std::string> all;
    for (const auto& g : p.generations) {
      for (std::size_t i = 0; i + n <= g.size(); ++i) all.push_back(gram_key(g, i, n));
    }
    if (all.empty()) continue;
    std::vector<std::string> uniq = all;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    ratios.push_back(static_cast<double>(uniq.size()) / static_cast<double>(all.size()));
  }
  if (ratios.empty()) return std::nullopt;
  double s = 0.0;
  for (double r : ratios) s += r;
  return s / static_cast<double>(ratios.size());
}

inline double repetition_bruteforce(const metrics::Corpus& c, std::size_t n) {
  std::size_t total = 0;
  std::size_t rep = 0;
  for (const auto& p : c.prompts) {
    for (const auto& g : p.generations) {
      ++total;
      bool found = false;
      for (std::size_t i = 0; i + n <= g.size() && !found; ++i) {
        for (std::size_t j = i + 1; j + n <= g.size() && !found; ++j) {
          found = std::equal(g.begin() + static_cast<std::ptrdiff_t>(i), g.begin() + static_cast<std::ptrdiff_t>(i + n),
                             g.begin() + static_cast<std::ptrdiff_t>(j));
        }
      }
      rep += found;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(rep) / static_cast<double>(total);
}

struct RegressionTruth {
  std::optional<long double> r;
  std::optional<long double> r2;
  long double mse = 0;
  long double l1 = 0;
};

inline RegressionTruth regression_bruteforce(const std::vector<double>& pred, const std::vector<double>& act) {
  const auto n = static_cast<long double>(pred.size());
  long double mp = 0, ma = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mp += pred[i];
    ma += act[i];
  }
  mp /= n;
  ma /= n;
  long double cov = 0, vp = 0, va = 0, sse = 0, l1 = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    cov += (pred[i] - mp) * (act[i] - ma);
    vp += (pred[i] - mp) * (pred[i] - mp);
    va += (act[i] - ma) * (act[i] - ma);
    sse += (pred[i] - act[i]) * (pred[i] - act[i]);
    l1 += std::fabs(static_cast<long double>(pred[i]) - act[i]);
  }
  RegressionTruth t;
  t.mse = sse / n;
  t.l1 = l1 / n;
  if (va > 0) t.r2 = 1 - sse / va;
  if (va > 0 && vp > 0) t.r = cov / std::sqrt(vp * va);
  return t;
}

struct AggregateTruth {
  std::optional<double> factuality;
  std::optional<double> diversity;
};

// rows hold canonical metric keys (entailr, neer, dist2, rep).
inline std::map<std::pair<std::string, std::string>, AggregateTruth> aggregate_bruteforce(
    const std::vector<metrics::ScoreRow>& rows) {
  std::set<std::string> models, methods, types, keys;
  for (const auto& r : rows) {
    models.insert(r.model);
    methods.insert(r.method);
    types.insert(r.prompt_type);
    keys.insert(r.metric);
  }
  auto value = [&](const std::string& mo, const std::string& me, const std::string& ty,
                   const std::string& k) -> std::optional<double> {
    std::optional<double> v;
    for (const auto& r : rows) {
      if (r.model == mo && r.method == me && r.prompt_type == ty && r.metric == k) v = r.value;
    }
    return v;
  };
  std::map<std::pair<std::string, std::string>, AggregateTruth> out;
  for (const auto& mo : models) {
    for (const auto& me : methods) {
      std::map<std::string, double> sum;
      std::map<std::string, int> cnt;
      bool present = false;
      for (const auto& ty : types) {
        for (const auto& k : keys) {
          const auto mine = value(mo, me, ty, k);
          if (!mine) continue;
          present = true;
          double lo = *mine, hi = *mine;
          for (const auto& other : methods) {
            if (auto v = value(mo, other, ty, k)) {
              lo = std::min(lo, *v);
              hi = std::max(hi, *v);
            }
          }
          sum[k] += hi == lo ? 0.5 : (*mine - lo) / (hi - lo);
          cnt[k] += 1;
        }
      }
      if (!present) continue;
      auto mean = [&](const char* k) -> std::optional<double> {
        if (!cnt.count(k)) return std::nullopt;
        return sum[k] / cnt[k];
      };
      AggregateTruth t;
      if (mean("entailr") && mean("neer")) t.factuality = *mean("entailr") - *mean("neer");
      if (mean("dist2") && mean("rep")) t.diversity = *mean("dist2") - *mean("rep");
      out[{mo, me}] = t;
    }
  }
  return out;
}

}  // namespace resid::testing
