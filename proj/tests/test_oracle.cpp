#include "resid/error.hpp"
#include "resid/oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace resid;
using namespace resid::oracle;

TEST_CASE("pythia-like family") {
  const auto fam = pythia_like_family();
  CHECK_NOTHROW(fam.validate());
  CHECK(fam.size() == 7);
  CHECK(fam.sizes.front() == doctest::Approx(std::log(18915328.0)));
  CHECK(fam.largest() == doctest::Approx(std::log(6444163072.0)));
}

TEST_CASE("mixture family entropy examples") {
  const TokenDistribution ideal({1.0, 0.0, 0.0, 0.0});
  MixtureFamily fam{ideal, 1.0, 10.0, pythia_like_family()};
  CHECK(fam.lambda(5.0) == 1.0);
  CHECK(family_entropy(fam, 5.0) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(family_entropy(fam, 1e4) == doctest::Approx(entropy(ideal)));
  const double half = 10.0 + std::log(2.0);
  CHECK(fam.lambda(half) == doctest::Approx(0.5).epsilon(1e-14));
  const double want = -(0.625 * std::log(0.625) + 3 * 0.125 * std::log(0.125));
  CHECK(family_entropy(fam, half) == doctest::Approx(want).epsilon(1e-12));
  CHECK(std::abs(family_entropy(fam, half) - 1.0735) < 1e-4);
}

TEST_CASE("mixture entropy is non-increasing in size") {
  Rng rng(6);
  for (int it = 0; it < 300; ++it) {
    const auto v = testing::uniform_int(rng, 2, 50);
    MixtureFamily fam{testing::random_distribution(rng, v, true), testing::uniform(rng, 0.1, 3),
                      testing::uniform(rng, 10, 20), pythia_like_family()};
    double prev = INFINITY;
    for (double s = 5.0; s < 35.0; s += 0.5) {
      const double h = family_entropy(fam, s);
      CHECK(h <= prev + 1e-12);
      CHECK(h >= fam.asymptotic_entropy() - 1e-12);
      prev = h;
    }
  }
}

TEST_CASE("profile generation") {
  MixtureSuiteConfig cfg;
  const auto a = generate_profiles(cfg, 500, 0.0, 42);
  const auto b = generate_profiles(cfg, 500, 0.0, 42);
  REQUIRE(a.size() == 500);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].profile.entropies.size() == 7);
    CHECK(a[i].profile.entropies == b[i].profile.entropies);
    CHECK(a[i].true_asymptote == b[i].true_asymptote);
    for (std::size_t j = 1; j < 7; ++j) CHECK(a[i].profile.entropies[j] <= a[i].profile.entropies[j - 1] + 1e-12);
    CHECK(a[i].profile.entropies.back() >= a[i].true_asymptote - 1e-12);
  }
  const auto noisy = generate_profiles(cfg, 200, 0.5, 1);
  for (const auto& op : noisy) {
    for (double e : op.profile.entropies) CHECK(e >= 0.0);
  }
  CHECK_THROWS_AS(generate_profiles(cfg, 0, 0.0, 1), ParameterError);
  CHECK_THROWS_AS(generate_profiles(cfg, 3, -1.0, 1), ParameterError);
}

TEST_CASE("separable case examples") {
  const TokenDistribution one({1.0});
  const auto worked = make_separable_case(0.8, one, TokenDistribution({0.25, 0.25, 0.25, 0.25}));
  const std::vector<double> want = {0.8, 0.05, 0.05, 0.05, 0.05};
  REQUIRE(worked.composite.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(worked.composite[i] == doctest::Approx(want[i]).epsilon(1e-15));
  CHECK(std::abs(worked.d_re_exact - 0.7777) < 1e-4);
  CHECK(check_theorem_bound(worked, 1.0) == doctest::Approx(0.8 - std::exp(-worked.d_re_exact)).epsilon(1e-14));
  CHECK(std::abs(check_theorem_bound(worked, 1.0) - 0.3405) < 1e-4);

  const auto none = make_separable_case(1.0, TokenDistribution({0.7, 0.3}), one);
  CHECK(none.d_re_exact == 0.0);
  CHECK(none.composite.size() == 2);
  CHECK(check_theorem_bound(none, 1.0) == 0.0);

  const auto sym = make_separable_case(0.5, one, one);
  CHECK(sym.d_re_exact == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  CHECK_THROWS_AS(make_separable_case(0.4, one, one), SeparabilityError);
  CHECK_THROWS_AS(make_separable_case(0.0, one, one), ParameterError);
  CHECK_THROWS_AS(check_theorem_bound(worked, 0.0), ParameterError);
}

TEST_CASE("truncating at g recovers the factual head") {
  Rng rng(10);
  for (int it = 0; it < 2000; ++it) {
    const auto c = random_separable_case(rng);
    CHECK(c.g * *std::min_element(c.factual.probs().begin(), c.factual.probs().end()) >=
          (1.0 - c.g) * *std::max_element(c.hallucination.probs().begin(), c.hallucination.probs().end()));
    CHECK(c.d_re_exact == doctest::Approx(entropy(c.composite) - entropy(c.factual)).epsilon(1e-12));
    const auto t = truncate_top_p(c.composite, c.g);
    REQUIRE(t.kept_count() == c.factual.size());
    for (std::size_t i = 0; i < c.factual.size(); ++i) CHECK(std::abs(t.dist[i] - c.factual[i]) <= 1e-12);
    for (double temp : {0.5, 1.0, 2.0}) CHECK(check_theorem_bound(c, temp) >= -1e-9);
  }
}

TEST_CASE("theorem sweep") {
  const auto r = theorem_sweep(2000, {0.5, 1.0, 2.0}, 7);
  CHECK(r.cases == 2000);
  CHECK(r.checks == 6000);
  CHECK(r.violations == 0);
  CHECK(r.min_margin >= -1e-9);
}

TEST_CASE("random dirichlet") {
  Rng rng(1);
  for (std::size_t k = 1; k < 20; ++k) {
    const auto d = random_dirichlet(k, rng);
    CHECK(d.size() == k);
    for (double p : d.probs()) CHECK(p > 0.0);
  }
  CHECK_THROWS_AS(random_dirichlet(0, rng), ParameterError);
}

TEST_CASE("detection suite") {
  DetectionSuiteConfig cfg;
  cfg.spans = 50;
  const auto a = generate_detection_suite(cfg, 3);
  const auto b = generate_detection_suite(cfg, 3);
  REQUIRE(a.size() == 50);
  std::size_t nonfactual = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].profiles.size() == cfg.tokens_per_span);
    CHECK(a[i].end - a[i].begin == static_cast<std::int64_t>(cfg.tokens_per_span));
    CHECK(a[i].label == b[i].label);
    nonfactual += a[i].label == detect::Label::nonfactual;
    for (const auto& p : a[i].profiles) {
      CHECK_NOTHROW(p.validate(cfg.family));
      REQUIRE(p.surprisals.has_value());
      CHECK(p.entropies == b[i].profiles[static_cast<std::size_t>(p.position)].entropies);
    }
  }
  CHECK(nonfactual > 0);
  CHECK(nonfactual < 50);
}
