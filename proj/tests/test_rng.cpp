#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include <spikeslab/rng.hpp>
#include <spikeslab/special.hpp>

#include "helpers.hpp"

using namespace spikeslab;
using namespace spikeslab::testing;

TEST_CASE("same seed reproduces the exact stream") {
  RngStream a(42), b(42);
  for (int i = 0; i < 64; ++i) {
    REQUIRE(a.uniform() == b.uniform());
  }
  RngStream c(42), d(42);
  for (int i = 0; i < 64; ++i) {
    REQUIRE(c.normal() == d.normal());
  }
}

TEST_CASE("different seeds and different streams decorrelate") {
  RngStream a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.uniform() == b.uniform()) ++equal;
  }
  REQUIRE(equal == 0);

  RngStream base(7);
  RngStream c0 = base.child(0);
  RngStream c1 = base.child(1);
  equal = 0;
  for (int i = 0; i < 64; ++i) {
    if (c0.uniform() == c1.uniform()) ++equal;
  }
  REQUIRE(equal == 0);
}

TEST_CASE("child streams are reproducible and do not disturb the parent") {
  RngStream parent(9);
  const double before = RngStream(9).uniform();
  RngStream child_a = parent.child(3);
  RngStream child_b = RngStream(9).child(3);
  for (int i = 0; i < 16; ++i) {
    REQUIRE(child_a.uniform() == child_b.uniform());
  }
  REQUIRE(parent.uniform() == before);
}

TEST_CASE("derive_seed is deterministic and label sensitive") {
  REQUIRE(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  REQUIRE(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
  REQUIRE(derive_seed(1, 2, 3) != derive_seed(1, 3, 3));
  REQUIRE(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
}

TEST_CASE("uniform draws live in [0,1) and match the uniform cdf") {
  RngStream rng(123);
  const int n = 200000;
  std::vector<double> xs(n);
  for (auto& x : xs) {
    x = rng.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
  REQUIRE(std::abs(sample_mean(xs) - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  const double ks = ks_statistic(xs, [](double t) {
    return std::clamp(t, 0.0, 1.0);
  });
  REQUIRE(ks < 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("uniform_pos never returns zero") {
  RngStream rng(5);
  for (int i = 0; i < 100000; ++i) {
    REQUIRE(rng.uniform_pos() > 0.0);
  }
}

TEST_CASE("normal draws match the standard normal cdf") {
  RngStream rng(321);
  const int n = 200000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = rng.normal();
  REQUIRE(std::abs(sample_mean(xs)) < 4.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(sample_variance(xs) - 1.0) <
          4.0 * std::sqrt(2.0 / static_cast<double>(n)));
  const double ks = ks_statistic(xs, [](double t) { return normal_cdf(t); });
  REQUIRE(ks < 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("exponential draws have unit mean and match the cdf") {
  RngStream rng(77);
  const int n = 200000;
  std::vector<double> xs(n);
  for (auto& x : xs) {
    x = rng.exponential();
    REQUIRE(x > 0.0);
  }
  REQUIRE(std::abs(sample_mean(xs) - 1.0) <
          4.0 / std::sqrt(static_cast<double>(n)));
  const double ks =
      ks_statistic(xs, [](double t) { return t <= 0.0 ? 0.0 : -std::expm1(-t); });
  REQUIRE(ks < 1.63 / std::sqrt(static_cast<double>(n)));
}
