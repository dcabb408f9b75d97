#include "resid/decay.hpp"
#include "resid/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace resid;

namespace {

// Straight transcription of the three curve formulas.
double eval_oracle(const DecayCurve& c, double s) {
  const double u = c.q * (s - c.g);
  switch (c.kind) {
    case CurveKind::fractional_polynomial: {
      const double x = u > 1.0 ? u : 1.0;
      double sum = c.a_half / std::sqrt(x);
      for (std::size_t k = 0; k < c.a.size(); ++k) sum += c.a[k] / std::pow(x, static_cast<double>(k + 1));
      return c.z + c.b * sum;
    }
    case CurveKind::exponential:
      return c.z + c.b * std::exp(-(u > 0.0 ? u : 0.0));
    case CurveKind::logistic:
      return c.z + c.b / (1.0 + std::exp(u > 0.0 ? u : 0.0));
  }
  return NAN;
}

}  // namespace

TEST_CASE("model family validation") {
  CHECK_NOTHROW(ModelFamilySpec({1, 2, 3}, {}).validate());
  CHECK_THROWS_AS(ModelFamilySpec({1, 2}, {}).validate(), ShapeError);
  CHECK_THROWS_AS(ModelFamilySpec({1, 3, 2}, {}).validate(), DataError);
  CHECK_THROWS_AS(ModelFamilySpec({1, 2, 2}, {}).validate(), DataError);
  CHECK_THROWS_AS(ModelFamilySpec({1, 2, INFINITY}, {}).validate(), DataError);
  CHECK_THROWS_AS(ModelFamilySpec({1, 2, 3}, {"a"}).validate(), ShapeError);
  CHECK(ModelFamilySpec({1, 2, 3}, {}).largest() == 3);
}

TEST_CASE("profile validation") {
  const auto fam = testing::small_family();
  EntropyProfile p{"c", 0, {1, 1, 1, 1}, std::nullopt};
  CHECK_NOTHROW(p.validate(fam));
  p.entropies = {1, 1, 1};
  CHECK_THROWS_AS(p.validate(fam), ShapeError);
  p.entropies = {1, 1, -0.1, 1};
  CHECK_THROWS_AS(p.validate(fam), DataError);
  p.entropies = {1, 1, NAN, 1};
  CHECK_THROWS_AS(p.validate(fam), DataError);
  p.entropies = {1, 1, 1, 1};
  p.surprisals = std::vector<double>{1, 2};
  CHECK_THROWS_AS(p.validate(fam), ShapeError);
  p.surprisals = std::vector<double>{1, 2, -1, 0};
  CHECK_THROWS_AS(p.validate(fam), DataError);
}

TEST_CASE("curve kind names") {
  CHECK(parse_curve_kind("fp") == CurveKind::fractional_polynomial);
  CHECK(parse_curve_kind("exp") == CurveKind::exponential);
  CHECK(parse_curve_kind("logistic") == CurveKind::logistic);
  for (auto k : {CurveKind::fractional_polynomial, CurveKind::exponential, CurveKind::logistic}) {
    CHECK(parse_curve_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_curve_kind("cubic"), UsageError);
}

TEST_CASE("curve evaluation examples") {
  DecayCurve flat{CurveKind::fractional_polynomial, 0.7, 0.0, 2.0, 1.0, 0.3, {0.5, 0.2}};
  for (double s : {-10.0, 0.0, 3.0, 1e6}) CHECK(flat.eval(s) == 0.7);

  DecayCurve c{CurveKind::fractional_polynomial, 1.0, 1.0, 1.0, 0.0, 0.0, {1.0}};
  CHECK(c.eval(2.0) == doctest::Approx(1.5).epsilon(1e-15));

  DecayCurve fp{CurveKind::fractional_polynomial, 0.5, 2.0, 0.5, 10.0, 0.25, {0.5, 0.25}};
  CHECK(fp.eval(10.0) == doctest::Approx(0.5 + 2.0 * 1.0).epsilon(1e-15));
  CHECK(fp.eval(11.9) == doctest::Approx(0.5 + 2.0 * 1.0).epsilon(1e-15));  // q(s-g) < 1 stays on the plateau
  DecayCurve ex{CurveKind::exponential, 0.5, 2.0, 0.5, 10.0, 0.0, {}};
  CHECK(ex.eval(3.0) == doctest::Approx(2.5));
  CHECK(ex.eval(12.0) == doctest::Approx(0.5 + 2.0 * std::exp(-1.0)).epsilon(1e-14));
  DecayCurve lg{CurveKind::logistic, 0.5, 2.0, 0.5, 10.0, 0.0, {}};
  CHECK(lg.eval(3.0) == doctest::Approx(1.5));
  CHECK(lg.eval(12.0) == doctest::Approx(0.5 + 2.0 / (1.0 + std::exp(1.0))).epsilon(1e-14));

  CHECK(fp.asymptote() == 0.5);
  CHECK(std::abs(fp.eval(1e6) - fp.asymptote()) < 1e-2);
  CHECK(std::abs(ex.eval(1e6) - ex.asymptote()) < 1e-12);
}

TEST_CASE("curve validation") {
  DecayCurve c{CurveKind::fractional_polynomial, 1.0, 1.0, 1.0, 0.0, 0.0, {1.0}};
  CHECK_NOTHROW(c.validate());
  c.b = -1e-3;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c.b = 1.0;
  c.a = {};
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c.a = {NAN};
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("curve properties on random parameters") {
  Rng rng(21);
  for (int it = 0; it < 3000; ++it) {
    const auto kind = static_cast<CurveKind>(it % 3);
    const auto c = testing::random_curve(rng, kind, testing::uniform_int(rng, 1, 10));
    double prev = INFINITY;
    for (int i = 0; i < 40; ++i) {
      const double s = -5.0 + i * 1.0;
      const double v = c.eval(s);
      CHECK(v == doctest::Approx(eval_oracle(c, s)).epsilon(1e-13));
      CHECK(v <= prev);
      CHECK(v >= c.asymptote());
      prev = v;
    }
    CHECK(residual_entropy(c, 20.0) >= 0.0);
    CHECK(residual_entropy(c, 20.0) == doctest::Approx(c.eval(20.0) - c.z));
  }
}

TEST_CASE("residual entropy examples") {
  CHECK(residual_entropy(flat_curve(1.3), 20.0) == 0.0);
  // Exponential curve placed so that eval(s_N) = 1.7777 exactly above z = 1.
  DecayCurve c{CurveKind::exponential, 1.0, 0.7777, 1.0, 5.0, 0.0, {}};
  CHECK(residual_entropy(c, 5.0) == doctest::Approx(0.7777).epsilon(1e-15));
}

TEST_CASE("flat curves") {
  for (auto k : {CurveKind::fractional_polynomial, CurveKind::exponential, CurveKind::logistic}) {
    const auto c = flat_curve(0.9, k, 3);
    CHECK_NOTHROW(c.validate());
    CHECK(c.eval(-4) == 0.9);
    CHECK(c.eval(40) == 0.9);
  }
}

TEST_CASE("rmse helpers") {
  const auto fam = testing::small_family();
  Rng rng(4);
  std::vector<DecayCurve> curves;
  std::vector<EntropyProfile> profiles;
  double sq = 0.0;
  for (int i = 0; i < 10; ++i) {
    curves.push_back(testing::random_curve(rng, CurveKind::fractional_polynomial, 3));
    EntropyProfile p{"c" + std::to_string(i), 0, {}, std::nullopt};
    for (std::size_t j = 0; j < fam.size(); ++j) p.entropies.push_back(testing::uniform(rng, 0, 6));
    for (std::size_t j = 0; j < fam.size(); ++j) {
      const double r = p.entropies[j] - eval_oracle(curves.back(), fam.sizes[j]);
      sq += r * r;
    }
    profiles.push_back(p);
  }
  CHECK(batch_rmse(curves, profiles, fam) == doctest::Approx(std::sqrt(sq / 40.0)).epsilon(1e-12));

  double one = 0.0;
  for (std::size_t j = 0; j < fam.size(); ++j) {
    const double r = profiles[0].entropies[j] - eval_oracle(curves[0], fam.sizes[j]);
    one += r * r;
  }
  CHECK(curve_rmse(curves[0], profiles[0], fam) == doctest::Approx(std::sqrt(one / 4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(batch_rmse({}, {}, fam), ShapeError);
  CHECK_THROWS_AS(batch_rmse({curves[0]}, profiles, fam), ShapeError);
}

TEST_CASE("profile smoothing") {
  const auto fam = ModelFamilySpec{{1, 2, 3}, {}};
  std::vector<EntropyProfile> ps = {
      {"a", 0, {1, 1, 1}, std::nullopt},
      {"a", 1, {2, 2, 2}, std::nullopt},
      {"a", 2, {3, 3, 6}, std::nullopt},
      {"b", 1, {9, 9, 9}, std::nullopt},
  };
  const auto same = smooth_profiles(ps, 1);
  REQUIRE(same.size() == ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(same[i].entropies == ps[i].entropies);

  const auto sm = smooth_profiles(ps, 3);
  auto find = [&](const std::string& id, std::int64_t pos) {
    for (const auto& p : sm) {
      if (p.context_id == id && p.position == pos) return p;
    }
    FAIL("missing profile");
    return EntropyProfile{};
  };
  CHECK(find("a", 1).entropies[0] == doctest::Approx(2.0));
  CHECK(find("a", 1).entropies[2] == doctest::Approx(3.0));
  CHECK(find("a", 0).entropies[0] == doctest::Approx(1.5));  // truncated window at the edge
  CHECK(find("a", 2).entropies[0] == doctest::Approx(2.5));
  CHECK(find("b", 1).entropies[0] == 9.0);                   // other contexts never mix in
  CHECK_THROWS_AS(smooth_profiles(ps, 2), ParameterError);
  CHECK_THROWS_AS(smooth_profiles(ps, 0), ParameterError);
  (void)fam;
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, "ctx", 3) == derive_seed(1, "ctx", 3));
  CHECK(derive_seed(1, "ctx", 3) != derive_seed(2, "ctx", 3));
  CHECK(derive_seed(1, "ctx", 3) != derive_seed(1, "ctx", 4));
  CHECK(derive_seed(1, "ctx", 3) != derive_seed(1, "ctY", 3));
}
