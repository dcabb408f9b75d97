#include "resid/decay.hpp"

#include "resid/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

namespace resid {

void ModelFamilySpec::validate() const {
  if (sizes.size() < 3) {
    throw ShapeError("a model family needs at least 3 sizes, got " + std::to_string(sizes.size()));
  }
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (!std::isfinite(sizes[i])) throw DataError("family size " + std::to_string(i) + " is not finite");
    if (i > 0 && !(sizes[i] > sizes[i - 1])) {
      throw DataError("family sizes must be strictly increasing");
    }
  }
  if (!labels.empty() && labels.size() != sizes.size()) {
    throw ShapeError("family labels must be empty or one per size");
  }
}

void EntropyProfile::validate(const ModelFamilySpec& family) const {
  if (entropies.size() != family.size()) {
    throw ShapeError("profile " + context_id + "@" + std::to_string(position) + " has " +
                     std::to_string(entropies.size()) + " entropies for a family of " +
                     std::to_string(family.size()));
  }
  for (double e : entropies) {
    if (!std::isfinite(e) || e < 0.0) {
      throw DataError("profile " + context_id + "@" + std::to_string(position) +
                      " has a negative or non-finite entropy");
    }
  }
  if (surprisals) {
    if (surprisals->size() != family.size()) {
      throw ShapeError("profile " + context_id + "@" + std::to_string(position) +
                       " has a surprisal vector of the wrong length");
    }
    for (double v : *surprisals) {
      if (!std::isfinite(v) || v < 0.0) {
        throw DataError("profile " + context_id + "@" + std::to_string(position) +
                        " has a negative or non-finite surprisal");
      }
    }
  }
}

std::string_view to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::fractional_polynomial: return "fractional_polynomial";
    case CurveKind::exponential: return "exponential";
    case CurveKind::logistic: return "logistic";
  }
  return "unknown";
}

CurveKind parse_curve_kind(std::string_view name) {
  if (name == "fp" || name == "fractional_polynomial") return CurveKind::fractional_polynomial;
  if (name == "exp" || name == "exponential") return CurveKind::exponential;
  if (name == "logistic") return CurveKind::logistic;
  throw UsageError("unknown curve kind '" + std::string(name) + "'");
}

void DecayCurve::validate() const {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ParameterError(std::string("curve parameter ") + name + " must be finite and >= 0");
    }
  };
  check(z, "z");
  check(b, "b");
  check(q, "q");
  check(g, "g");
  check(a_half, "a_half");
  for (double v : a) check(v, "a_k");
  if (kind == CurveKind::fractional_polynomial && a.empty()) {
    throw ParameterError("fractional polynomial curves need degree K >= 1");
  }
}

double DecayCurve::eval(double s) const {
  const double y = q * (s - g);
  switch (kind) {
    case CurveKind::fractional_polynomial: {
      const double x = std::max(1.0, y);
      double decay = a_half / std::sqrt(x);
      double inv = 1.0;
      for (double ak : a) {
        inv /= x;
        decay += ak * inv;
      }
      return z + b * decay;
    }
    case CurveKind::exponential:
      return z + b * std::exp(-std::max(0.0, y));
    case CurveKind::logistic:
      return z + b / (1.0 + std::exp(std::max(0.0, y)));
  }
  return z;
}

DecayCurve flat_curve(double level, CurveKind kind, std::size_t degree) {
  DecayCurve c;
  c.kind = kind;
  c.z = level;
  if (kind == CurveKind::fractional_polynomial) c.a.assign(std::max<std::size_t>(degree, 1), 0.0);
  return c;
}

double residual_entropy(const DecayCurve& curve, double s_largest) {
  // Clamp the last-ulp negatives that rounding can produce for b ~ 0.
  return std::max(0.0, curve.eval(s_largest) - curve.asymptote());
}

double curve_rmse(const DecayCurve& curve, const EntropyProfile& profile,
                  const ModelFamilySpec& family) {
  profile.validate(family);
  double sq = 0.0;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const double r = profile.entropies[i] - curve.eval(family.sizes[i]);
    sq += r * r;
  }
  return std::sqrt(sq / static_cast<double>(family.size()));
}

double batch_rmse(const std::vector<DecayCurve>& curves, const std::vector<EntropyProfile>& profiles,
                  const ModelFamilySpec& family) {
  if (curves.size() != profiles.size()) throw ShapeError("curve and profile counts differ");
  if (profiles.empty()) throw ShapeError("batch loss over an empty batch");
  double sq = 0.0;
  for (std::size_t c = 0; c < profiles.size(); ++c) {
    profiles[c].validate(family);
    for (std::size_t i = 0; i < family.size(); ++i) {
      const double r = profiles[c].entropies[i] - curves[c].eval(family.sizes[i]);
      sq += r * r;
    }
  }
  return std::sqrt(sq / static_cast<double>(profiles.size() * family.size()));
}

std::vector<EntropyProfile> smooth_profiles(const std::vector<EntropyProfile>& profiles,
                                            int window) {
  if (window < 1 || window % 2 == 0) throw ParameterError("smoothing window must be a positive odd integer");
  if (window == 1) return profiles;
  const auto half = static_cast<std::int64_t>(window / 2);

  // Group indices by context, ordered by position.
  std::map<std::string, std::vector<std::size_t>> by_context;
  for (std::size_t i = 0; i < profiles.size(); ++i) by_context[profiles[i].context_id].push_back(i);

  std::vector<EntropyProfile> out = profiles;
  for (auto& [ctx, idx] : by_context) {
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t l, std::size_t r) { return profiles[l].position < profiles[r].position; });
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& centre = profiles[idx[k]];
      std::vector<double> ent(centre.entropies.size(), 0.0);
      std::vector<double> sur(centre.entropies.size(), 0.0);
      bool all_surprisal = true;
      std::size_t used = 0;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto& other = profiles[idx[j]];
        if (std::abs(other.position - centre.position) > half) continue;
        if (other.entropies.size() != ent.size()) throw ShapeError("profiles of one context differ in length");
        for (std::size_t s = 0; s < ent.size(); ++s) ent[s] += other.entropies[s];
        if (other.surprisals && other.surprisals->size() == sur.size()) {
          for (std::size_t s = 0; s < sur.size(); ++s) sur[s] += (*other.surprisals)[s];
        } else {
          all_surprisal = false;
        }
        ++used;
      }
      for (double& v : ent) v /= static_cast<double>(used);
      out[idx[k]].entropies = std::move(ent);
      if (all_surprisal && centre.surprisals) {
        for (double& v : sur) v /= static_cast<double>(used);
        out[idx[k]].surprisals = std::move(sur);
      }
    }
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view context_id, std::int64_t position) {
  // FNV-1a over the context id, then splitmix64 finalization of the mix.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : context_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t x = seed ^ (h + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  x ^= static_cast<std::uint64_t>(position) * 0xbf58476d1ce4e5b9ULL;
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace resid
