#pragma once

// Entropy-decay curves over a model family.
//
// For one context, each member of a model family (sizes s_1 < ... < s_N on
// a natural-log parameter-count scale) yields a next-token entropy. Those
// points are fitted with a non-increasing curve e(s) whose limit z as
// s -> infinity estimates the asymptotic entropy; e(s_N) - z is the
// residual entropy that drives adaptive truncation.
//
// Three curve kinds are supported, all with non-negative parameters:
//
//   fractional_polynomial  e(s) = z + b * (a_half / x^0.5 + sum_k a_k / x^k),
//                          x = max(1, q * (s - g))
//   exponential            e(s) = z + b * exp(-max(0, q * (s - g)))
//   logistic               e(s) = z + b / (1 + exp(max(0, q * (s - g))))

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace resid {

struct ModelFamilySpec {
  std::vector<double> sizes;        // ln(non-embedding parameter count), strictly increasing
  std::vector<std::string> labels;  // optional, empty or one per size

  // Throws ShapeError / DataError when fewer than 3 sizes, non-finite or not
  // strictly increasing.
  void validate() const;
  std::size_t size() const { return sizes.size(); }
  double largest() const { return sizes.back(); }
};

struct EntropyProfile {
  std::string context_id;
  std::int64_t position = 0;
  std::vector<double> entropies;                   // nats, aligned to family sizes
  std::optional<std::vector<double>> surprisals;   // nats, -log p(realized token)

  void validate(const ModelFamilySpec& family) const;
};

enum class CurveKind { fractional_polynomial, exponential, logistic };

std::string_view to_string(CurveKind kind);
// Accepts the long names and the CLI short forms fp / exp / logistic.
CurveKind parse_curve_kind(std::string_view name);

struct DecayCurve {
  CurveKind kind = CurveKind::fractional_polynomial;
  double z = 0.0;
  double b = 0.0;
  double q = 0.0;
  double g = 0.0;
  double a_half = 0.0;
  std::vector<double> a;  // a_1..a_K; empty for exponential and logistic

  std::size_t degree() const { return a.size(); }

  // Throws ParameterError if any parameter is negative or non-finite.
  void validate() const;

  double eval(double s) const;
  double asymptote() const { return z; }
};

DecayCurve flat_curve(double level, CurveKind kind = CurveKind::fractional_polynomial,
                      std::size_t degree = 1);

double residual_entropy(const DecayCurve& curve, double s_largest);

struct FitConfig {
  int max_iterations = 500;
  double loss_tolerance = 1e-8;
  int num_restarts = 8;
  std::uint64_t rng_seed = 0;
  double parameter_bound = 1e4;

  void validate() const;
};

struct FitResult {
  DecayCurve curve;
  double loss = 0.0;                  // RMSE at `curve`
  std::vector<double> restart_losses; // one per restart, same objective
};

// Multi-start Levenberg-Marquardt fit of one profile, minimizing
// sqrt(mean((e_i - eval(s_i))^2)). Deterministic in (config.rng_seed,
// profile.context_id, profile.position).
FitResult fit_curve(const EntropyProfile& profile, const ModelFamilySpec& family, CurveKind kind,
                    std::size_t degree, const FitConfig& config);

// Root-mean-square error of one curve against one profile.
double curve_rmse(const DecayCurve& curve, const EntropyProfile& profile,
                  const ModelFamilySpec& family);

// Batch objective over many (curve, profile) pairs: the square root of the
// mean squared residual over all points of all profiles.
double batch_rmse(const std::vector<DecayCurve>& curves, const std::vector<EntropyProfile>& profiles,
                  const ModelFamilySpec& family);

// Centered moving average of entropies (and surprisals, when every profile
// in the window has them) across neighboring positions of the same
// context_id. Windows are truncated at context edges. window must be odd.
std::vector<EntropyProfile> smooth_profiles(const std::vector<EntropyProfile>& profiles,
                                            int window);

// Deterministic per-fit seed derived from the run seed and profile identity.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view context_id, std::int64_t position);

}  // namespace resid
