#include "resid/dist.hpp"
#include "resid/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace resid;
using resid::testing::random_distribution;

namespace {

std::vector<double> as_vec(const TokenDistribution& d) { return {d.probs().begin(), d.probs().end()}; }

// Top-p truncation by exhaustive search over prefix lengths of a sorted copy.
std::vector<TokenId> top_p_oracle(const TokenDistribution& d, double t) {
  std::vector<TokenId> order(d.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    return d[a] != d[b] ? d[a] > d[b] : a < b;
  });
  std::size_t best = 1;
  for (std::size_t j = 1; j <= order.size(); ++j) {
    double mass = 0.0;
    for (std::size_t i = 0; i < j; ++i) mass += d[order[i]];
    if (mass <= t + 1e-12) best = j;
  }
  return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(best)};
}

}  // namespace

TEST_CASE("normalize") {
  CHECK(as_vec(normalize(std::vector<double>{2, 2})) == std::vector<double>{0.5, 0.5});
  const auto d = normalize(std::vector<double>{1, 0, 3});
  CHECK(d[0] == doctest::Approx(0.25));
  CHECK(d[1] == 0.0);
  CHECK(d[2] == doctest::Approx(0.75));
  CHECK_THROWS_AS(normalize(std::vector<double>{0, 0}), InvalidDistribution);
  CHECK_THROWS_AS(normalize(std::vector<double>{1, -1}), InvalidDistribution);
  CHECK_THROWS_AS(normalize(std::vector<double>{1, NAN}), InvalidDistribution);
  CHECK_THROWS_AS(normalize(std::vector<double>{}), InvalidDistribution);
}

TEST_CASE("distribution and logit validation") {
  CHECK_THROWS_AS(TokenDistribution({0.5, 0.4}), InvalidDistribution);
  CHECK_THROWS_AS(TokenDistribution({}), InvalidDistribution);
  CHECK_THROWS_AS(TokenDistribution({1.5, -0.5}), InvalidDistribution);
  CHECK_NOTHROW(TokenDistribution({0.5, 0.5 + 5e-10}));
  CHECK_THROWS_AS(LogitVector({1.0, INFINITY}), InvalidDistribution);
  CHECK_THROWS_AS(LogitVector({}), InvalidDistribution);
  CHECK(TokenDistribution({0.4, 0.4, 0.2}).argmax() == 0);
}

TEST_CASE("entropy examples") {
  CHECK(entropy(TokenDistribution({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(entropy(TokenDistribution({1, 0, 0})) == 0.0);
  const double h = entropy(TokenDistribution({0.8, 0.05, 0.05, 0.05, 0.05}));
  const double by_hand = -(0.8 * std::log(0.8) + 4 * 0.05 * std::log(0.05));
  CHECK(h == doctest::Approx(by_hand).epsilon(1e-14));
  CHECK(std::abs(h - 0.7777) < 1e-4);
}

TEST_CASE("entropy properties") {
  Rng rng(11);
  for (int it = 0; it < 500; ++it) {
    const std::size_t v = testing::uniform_int(rng, 1, 40);
    const auto d = random_distribution(rng, v, true);
    const double h = entropy(d);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(v)) + 1e-12);
    auto p = as_vec(d);
    std::shuffle(p.begin(), p.end(), rng);
    CHECK(entropy(TokenDistribution(p)) == doctest::Approx(h).epsilon(1e-12));
  }
  for (std::size_t v = 1; v < 50; ++v) {
    CHECK(entropy(TokenDistribution(std::vector<double>(v, 1.0 / static_cast<double>(v)))) ==
          doctest::Approx(std::log(static_cast<double>(v))).epsilon(1e-12));
  }
}

TEST_CASE("top-p examples") {
  const TokenDistribution d({0.5, 0.3, 0.2});
  auto a = truncate_top_p(d, 0.6);
  CHECK(a.kept == std::vector<TokenId>{0});
  CHECK(as_vec(a.dist) == std::vector<double>{1.0, 0.0, 0.0});
  auto b = truncate_top_p(d, 0.8);
  CHECK(b.kept == std::vector<TokenId>{0, 1});
  CHECK(b.dist[0] == doctest::Approx(0.625));
  CHECK(b.dist[1] == doctest::Approx(0.375));
  CHECK(b.dist[2] == 0.0);
  CHECK(b.effective_threshold == 0.8);
  auto c = truncate_top_p(d, 1.0);
  CHECK(as_vec(c.dist) == as_vec(d));
  CHECK(c.kept_count() == 3);
  CHECK_THROWS_AS(truncate_top_p(d, 1.5), ParameterError);
  CHECK_THROWS_AS(truncate_top_p(d, -0.1), ParameterError);
}

TEST_CASE("top-p matches exhaustive oracle") {
  Rng rng(5);
  for (int it = 0; it < 2000; ++it) {
    const auto d = random_distribution(rng, testing::uniform_int(rng, 1, 30), true);
    const double t = it % 10 == 0 ? 0.0 : (it % 10 == 1 ? 1.0 : uniform01(rng));
    const auto got = truncate_top_p(d, t);
    const auto want = top_p_oracle(d, t);
    REQUIRE(got.kept == want);
    CHECK(std::find(got.kept.begin(), got.kept.end(), d.argmax()) != got.kept.end());
    for (TokenId i = 0; i < d.size(); ++i) {
      if (d[i] == 0.0) CHECK(got.dist[i] == 0.0);
    }
    if (t == 0.0) CHECK(got.kept == std::vector<TokenId>{d.argmax()});
    if (t == 1.0) CHECK(as_vec(got.dist) == as_vec(d));
  }
}

TEST_CASE("top-k examples and properties") {
  const TokenDistribution d({0.5, 0.3, 0.2});
  auto a = truncate_top_k(d, 2);
  CHECK(a.dist[0] == doctest::Approx(0.625));
  CHECK(a.dist[1] == doctest::Approx(0.375));
  CHECK(a.dist[2] == 0.0);
  CHECK(as_vec(truncate_top_k(d, 3).dist) == as_vec(d));
  CHECK(as_vec(truncate_top_k(d, 100).dist) == as_vec(d));
  CHECK(truncate_top_k(TokenDistribution({0.4, 0.4, 0.2}), 1).kept == std::vector<TokenId>{0});
  CHECK(truncate_top_k(d, 1.5).kept_count() == 2);   // half rounds up
  CHECK(truncate_top_k(d, 1.49).kept_count() == 1);
  CHECK(truncate_top_k(d, 0.2).kept_count() == 1);   // floor of 1
  CHECK_THROWS_AS(truncate_top_k(d, NAN), ParameterError);

  Rng rng(8);
  for (int it = 0; it < 500; ++it) {
    const auto p = random_distribution(rng, testing::uniform_int(rng, 1, 20));
    CHECK(truncate_top_k(p, 1).kept == std::vector<TokenId>{p.argmax()});
    CHECK(as_vec(truncate_top_k(p, static_cast<double>(p.size())).dist) == as_vec(p));
  }
}

TEST_CASE("temperature") {
  CHECK(as_vec(apply_temperature(LogitVector({0, 0}), 0.3)) == std::vector<double>{0.5, 0.5});
  const auto d = apply_temperature(LogitVector({std::log(3.0), 0.0}), 1.0);
  CHECK(d[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(d[1] == doctest::Approx(0.25).epsilon(1e-12));
  const auto hot = apply_temperature(LogitVector({1.0, 0.0}), 1e6);
  CHECK(hot[0] == doctest::Approx(0.5).epsilon(1e-5));
  CHECK_THROWS_AS(apply_temperature(LogitVector({1.0}), 0.0), ParameterError);
  CHECK_THROWS_AS(apply_temperature(LogitVector({1.0}), -2.0), ParameterError);

  Rng rng(2);
  for (int it = 0; it < 300; ++it) {
    const LogitVector l(testing::random_logits(rng, 12));
    const auto base = softmax(l.values());
    const double tau = std::exp(testing::uniform(rng, -3, 3));
    CHECK(apply_temperature(l, tau).argmax() == base.argmax());
    CHECK(as_vec(apply_temperature(l, 1.0)) == as_vec(base));
  }
}

TEST_CASE("sampling") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) CHECK(sample(TokenDistribution({0, 0, 1}), rng) == 2);

  Rng r1(99), r2(99);
  const TokenDistribution half({0.5, 0.5});
  for (int i = 0; i < 200; ++i) CHECK(sample(half, r1) == sample(half, r2));

  Rng mc(12345);
  const TokenDistribution d({0.8, 0.2});
  std::size_t zeros = 0;
  const std::size_t draws = 1000000;
  for (std::size_t i = 0; i < draws; ++i) zeros += sample(d, mc) == 0;
  CHECK(std::abs(static_cast<double>(zeros) / draws - 0.8) <= 0.002);

  // Zero-probability tokens are never drawn.
  Rng z(3);
  const TokenDistribution sparse({0.0, 0.5, 0.0, 0.5, 0.0});
  for (int i = 0; i < 10000; ++i) {
    const auto t = sample(sparse, z);
    CHECK((t == 1 || t == 3));
  }
}
