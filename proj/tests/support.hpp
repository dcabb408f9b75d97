#pragma once

// Hand-rolled generators shared by the property tests.

#include "resid/decay.hpp"
#include "resid/dist.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace resid::testing {

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

// Random distribution over `v` tokens; roughly a quarter of entries are
// zero when `sparse` is set, and ties are injected now and then.
inline TokenDistribution random_distribution(Rng& rng, std::size_t v, bool sparse = false) {
  std::vector<double> w(v);
  for (auto& x : w) x = -std::log1p(-uniform01(rng));
  if (sparse) {
    for (auto& x : w) {
      if (uniform01(rng) < 0.25) x = 0.0;
    }
  }
  if (v > 2 && uniform01(rng) < 0.2) w[1] = w[0];
  bool any = false;
  for (double x : w) any = any || x > 0.0;
  if (!any) w[0] = 1.0;
  return normalize(w);
}

inline std::vector<double> random_logits(Rng& rng, std::size_t v, double scale = 3.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> out(v);
  for (auto& x : out) x = n(rng);
  return out;
}

inline DecayCurve random_curve(Rng& rng, CurveKind kind, std::size_t degree) {
  DecayCurve c;
  c.kind = kind;
  c.z = uniform(rng, 0.0, 5.0);
  c.b = uniform(rng, 0.0, 5.0);
  c.q = std::exp(uniform(rng, std::log(1e-3), std::log(10.0)));
  c.g = uniform(rng, 0.0, 25.0);
  if (kind == CurveKind::fractional_polynomial) {
    c.a_half = uniform01(rng);
    c.a.resize(degree);
    for (auto& x : c.a) x = uniform01(rng) < 0.3 ? 0.0 : uniform01(rng);
  }
  return c;
}

inline ModelFamilySpec small_family() {
  return ModelFamilySpec{{1.0, 2.0, 3.0, 4.0}, {}};
}

}  // namespace resid::testing
