#include "resid/detect.hpp"

#include "resid/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace resid::detect {

std::string_view to_string(Label label) {
  return label == Label::nonfactual ? "nonfactual" : "factual";
}

Label parse_label(std::string_view name) {
  if (name == "factual" || name == "0") return Label::factual;
  if (name == "nonfactual" || name == "1") return Label::nonfactual;
  throw DataError("unknown label '" + std::string(name) + "'");
}

std::optional<double> feature(const DetectionFeatureVector& v, std::string_view name) {
  if (name == "large_per") return v.large_per;
  if (name == "large_ent") return v.large_ent;
  if (name == "small_per") return v.small_per;
  if (name == "small_ent") return v.small_ent;
  if (name == "heur_per") return v.heur_per;
  if (name == "heur_ent") return v.heur_ent;
  if (name == "re") return v.re;
  if (name == "ae") return v.ae;
  throw UsageError("unknown feature '" + std::string(name) + "'");
}

double heuristic(double large, double small) {
  return std::sqrt(large * std::max(0.0, small - large));
}

DetectionFeatureVector extract_features(const LabeledSpan& span, const std::vector<DecayCurve>& curves,
                                        const ModelFamilySpec& family, Aggregation mode) {
  if (span.profiles.empty()) throw ShapeError("span " + span.context_id + " has no tokens");
  if (curves.size() != span.profiles.size()) {
    throw ShapeError("span " + span.context_id + " has " + std::to_string(span.profiles.size()) +
                     " tokens but " + std::to_string(curves.size()) + " curves");
  }
  for (const auto& p : span.profiles) p.validate(family);

  std::vector<std::size_t> use(span.profiles.size());
  std::iota(use.begin(), use.end(), std::size_t{0});
  if (mode == Aggregation::first_token) {
    const auto first = std::min_element(use.begin(), use.end(), [&](std::size_t a, std::size_t b) {
      return span.profiles[a].position < span.profiles[b].position;
    });
    use = {*first};
  }

  const std::size_t last = family.size() - 1;
  const auto count = static_cast<double>(use.size());
  DetectionFeatureVector f;
  double large_sur = 0.0;
  double small_sur = 0.0;
  bool have_surprisal = true;
  for (std::size_t i : use) {
    const auto& p = span.profiles[i];
    f.large_ent += p.entropies[last];
    f.small_ent += p.entropies[0];
    f.re += residual_entropy(curves[i], family.largest());
    f.ae += curves[i].asymptote();
    if (p.surprisals) {
      large_sur += (*p.surprisals)[last];
      small_sur += (*p.surprisals)[0];
    } else {
      have_surprisal = false;
    }
  }
  f.large_ent /= count;
  f.small_ent /= count;
  f.re /= count;
  f.ae /= count;
  f.heur_ent = heuristic(f.large_ent, f.small_ent);
  if (have_surprisal) {
    f.large_per = std::exp(large_sur / count);
    f.small_per = std::exp(small_sur / count);
    f.heur_per = heuristic(*f.large_per, *f.small_per);
  }
  return f;
}

namespace {

std::vector<double> oriented(std::span<const double> values, bool higher_is_nonfactual) {
  std::vector<double> s(values.begin(), values.end());
  for (double v : s) {
    if (!std::isfinite(v)) throw DataError("feature values must be finite");
  }
  if (!higher_is_nonfactual) {
    for (double& v : s) v = -v;
  }
  return s;
}

}  // namespace

FeatureScore score_feature(std::span<const double> values, std::span<const Label> labels,
                           bool higher_is_nonfactual) {
  if (values.size() != labels.size()) throw ShapeError("values and labels differ in length");
  if (values.empty()) throw ShapeError("cannot score an empty feature");
  const std::vector<double> s = oriented(values, higher_is_nonfactual);
  const std::size_t n = s.size();
  const auto positives = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), Label::nonfactual));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });

  FeatureScore out;
  // Threshold sweep from "predict everything factual" downward; tied scores
  // move across the threshold together.
  std::size_t tp = 0;
  std::size_t fp = 0;
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t best_correct = n - positives;
  double best_threshold = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && s[order[j]] == s[order[i]]) {
      if (labels[order[j]] == Label::nonfactual) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    if (positives > 0) {
      const double recall = static_cast<double>(tp) / static_cast<double>(positives);
      const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
      ap += (recall - prev_recall) * precision;
      prev_recall = recall;
    }
    const std::size_t correct = tp + (n - positives - fp);
    if (correct > best_correct) {
      best_correct = correct;
      best_threshold = s[order[i]];
    }
    i = j;
  }
  if (positives > 0 && positives < n) out.auc = ap;
  out.accuracy = static_cast<double>(best_correct) / static_cast<double>(n);
  out.threshold = higher_is_nonfactual || !std::isfinite(best_threshold) ? best_threshold : -best_threshold;
  return out;
}

double pick_one_accuracy(std::span<const double> values, std::span<const Label> labels,
                         bool higher_is_nonfactual, std::size_t group_size) {
  if (values.size() != labels.size()) throw ShapeError("values and labels differ in length");
  if (group_size < 1 || values.empty() || values.size() % group_size != 0) {
    throw ShapeError("row count must be a positive multiple of the group size");
  }
  const std::vector<double> s = oriented(values, higher_is_nonfactual);
  std::size_t hits = 0;
  const std::size_t groups = s.size() / group_size;
  for (std::size_t g = 0; g < groups; ++g) {
    const auto begin = s.begin() + static_cast<std::ptrdiff_t>(g * group_size);
    const auto pick = static_cast<std::size_t>(std::min_element(begin, begin + static_cast<std::ptrdiff_t>(group_size)) - s.begin());
    if (labels[pick] == Label::factual) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(groups);
}

}  // namespace resid::detect
