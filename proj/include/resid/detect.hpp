#pragma once

// Unsupervised hallucination-detection features over token spans.
//
// "large" is the largest family member and "small" the smallest. Entropy
// features average per-token entropies; a span's perplexity is
// exp(mean surprisal) in nats. The heuristic features combine the two
// extremes as sqrt(large * max(0, small - large)). RE and AE average the
// per-token residual entropy and asymptote of the fitted decay curves.

#include "resid/decay.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace resid::detect {

enum class Label { factual, nonfactual };

std::string_view to_string(Label label);
Label parse_label(std::string_view name);

struct LabeledSpan {
  std::string context_id;
  std::int64_t begin = 0;  // first position, inclusive
  std::int64_t end = 0;    // last position, exclusive
  Label label = Label::factual;
  std::vector<EntropyProfile> profiles;  // one per token in [begin, end)
};

struct DetectionFeatureVector {
  std::optional<double> large_per;
  double large_ent = 0.0;
  std::optional<double> small_per;
  double small_ent = 0.0;
  std::optional<double> heur_per;
  double heur_ent = 0.0;
  double re = 0.0;
  double ae = 0.0;
};

inline constexpr std::array<std::string_view, 8> kFeatureNames = {
    "large_per", "large_ent", "small_per", "small_ent", "heur_per", "heur_ent", "re", "ae"};

// Feature by column name; empty when a perplexity feature is absent.
std::optional<double> feature(const DetectionFeatureVector& v, std::string_view name);

enum class Aggregation { mean, first_token };

double heuristic(double large, double small);

// `curves[i]` belongs to `span.profiles[i]`. Throws ShapeError on
// misalignment or an empty span. Perplexity features are absent unless
// every aggregated token carries surprisals.
DetectionFeatureVector extract_features(const LabeledSpan& span, const std::vector<DecayCurve>& curves,
                                        const ModelFamilySpec& family,
                                        Aggregation mode = Aggregation::mean);

struct FeatureScore {
  std::optional<double> auc;  // absent when only one class is present
  double accuracy = 0.0;      // at the best single threshold
  double threshold = 0.0;
};

// Area under the precision-recall curve (average precision, nonfactual as
// the positive class) and best-threshold accuracy. When
// higher_is_nonfactual is false the feature is negated first.
FeatureScore score_feature(std::span<const double> values, std::span<const Label> labels,
                           bool higher_is_nonfactual);

// Rows are consumed in consecutive groups of `group_size`; in each group the
// row with the lowest hallucination score is picked, and the result is the
// fraction of groups whose pick is factual.
double pick_one_accuracy(std::span<const double> values, std::span<const Label> labels,
                         bool higher_is_nonfactual, std::size_t group_size = 4);

}  // namespace resid::detect
