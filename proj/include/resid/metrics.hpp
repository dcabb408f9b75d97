#pragma once

// Diversity metrics over generated token sequences, regression metrics for
// entropy predictions, and the max-min aggregation of per-method scores.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace resid::metrics {

using Sequence = std::vector<std::int64_t>;

struct PromptGenerations {
  std::string prompt_id;
  std::vector<Sequence> generations;
};

struct Corpus {
  std::vector<PromptGenerations> prompts;

  // Throws DataError on an empty sequence.
  void validate() const;
};

// Unique / total n-grams, pooled over the generations of one prompt and
// averaged over prompts that have at least one n-gram. Throws
// UndefinedMetric when no sequence is long enough.
double distinct_n(const Corpus& corpus, int n);

// Fraction of generations in which some n-gram occurs at least twice.
double repetition_ratio(const Corpus& corpus, int n = 4);

struct RegressionReport {
  std::optional<double> pearson_r;  // absent when either side has zero variance
  std::optional<double> r2;         // absent when `actual` has zero variance
  double mse = 0.0;
  double mean_l1 = 0.0;
};

RegressionReport regression_report(std::span<const double> predicted, std::span<const double> actual);

struct ScoreRow {
  std::string method;
  std::string model;
  std::string prompt_type;
  std::string metric;  // Entail_R, NE_ER, Dist-2 or Rep (case and punctuation insensitive)
  double value = 0.0;
};

struct Aggregate {
  std::string model;
  std::string method;
  std::optional<double> factuality;  // Entail_Rn - NE_ERn
  std::optional<double> diversity;   // Dist-2n - Repn
};

// Max-min normalizes every metric across methods within each (model,
// prompt type) group, averages the normalized values over prompt types and
// combines them. A group whose metric has max == min normalizes to 0.5.
// Throws DataError when a group holds fewer than two methods.
std::vector<Aggregate> minmax_aggregate(const std::vector<ScoreRow>& rows);

// Canonical metric key: "entailr", "neer", "dist2", "rep" or the
// lower-cased alphanumeric residue for anything else.
std::string metric_key(std::string_view name);

}  // namespace resid::metrics
