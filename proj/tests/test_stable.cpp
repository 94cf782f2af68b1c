#include <gtest/gtest.h>

#include <cmath>

#include "thermocap/stable.hpp"

using namespace thermocap;

namespace {

struct Probe {
  double xi0, xi1;
  std::size_t i0, i1;  // grid indices on each axis
};

}  // namespace

class StableCharacteristic : public ::testing::TestWithParam<double> {};

TEST_P(StableCharacteristic, MatchesLaplaceExponent) {
  const double alpha = GetParam();
  const std::vector<std::vector<double>> grid{{0.0, 0.5, 1.0}, {0.0, 0.25, 1.0}};
  const Probe probes[] = {{0.3, 0.0, 2, 0}, {1.0, 0.0, 1, 1}, {0.0, 1.5, 2, 2}, {0.7, 0.7, 2, 1},
                          {2.0, -1.0, 1, 0}, {0.2, 0.1, 2, 2}, {-1.2, 0.4, 0, 2}, {0.5, 2.5, 1, 2},
                          {3.0, 0.0, 0, 1}, {1.0, 1.0, 2, 2}};
  const std::size_t n = 20000;
  std::vector<double> s(std::size(probes), 0.0), s2(std::size(probes), 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const auto path = sample_additive_stable(grid, 2, alpha, derive_seed(5, p));
    for (std::size_t k = 0; k < std::size(probes); ++k) {
      const auto& q = probes[k];
      const auto x = path.at({q.i0, q.i1});
      const double v = std::cos(q.xi0 * x[0] + q.xi1 * x[1]);
      s[k] += v;
      s2[k] += v * v;
    }
  }
  for (std::size_t k = 0; k < std::size(probes); ++k) {
    const auto& q = probes[k];
    const double u1 = grid[0][q.i0] + grid[1][q.i1];
    const double norm = std::hypot(q.xi0, q.xi1);
    const double expect = std::exp(-u1 * std::pow(norm, alpha) / 2.0);
    const double mean = s[k] / n;
    const double se = std::sqrt(std::max(1e-12, s2[k] / n - mean * mean) / n);
    EXPECT_NEAR(mean, expect, 4.0 * se + 1e-9) << "probe " << k;
  }
}

INSTANTIATE_TEST_SUITE_P(Alphas, StableCharacteristic, ::testing::Values(0.5, 1.0, 1.5));

TEST(Stable, StartsAtOriginAndIsAdditive) {
  const std::vector<std::vector<double>> grid{{0.0, 0.3, 0.9}, {0.0, 0.4}};
  const auto path = sample_additive_stable(grid, 3, 1.2, 17);
  const auto origin = path.at({0, 0});
  for (double v : origin) EXPECT_EQ(v, 0.0);
  const auto a = path.at({2, 0}), b = path.at({0, 1}), ab = path.at({2, 1});
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(ab[c], a[c] + b[c]);
  EXPECT_EQ(path.values().size(), 6u * 3u);
}

TEST(Stable, Deterministic) {
  const std::vector<std::vector<double>> grid{{0.1, 0.2, 0.5}};
  EXPECT_EQ(sample_additive_stable(grid, 2, 0.8, 4).axis_values, sample_additive_stable(grid, 2, 0.8, 4).axis_values);
  EXPECT_NE(sample_additive_stable(grid, 2, 0.8, 4).axis_values, sample_additive_stable(grid, 2, 0.8, 5).axis_values);
}

TEST(Stable, RejectsBadInput) {
  EXPECT_THROW(sample_additive_stable({{0.1}}, 1, 2.0, 1), Error);
  EXPECT_THROW(sample_additive_stable({{0.2, 0.1}}, 1, 1.0, 1), Error);
  EXPECT_THROW(sample_additive_stable({}, 1, 1.0, 1), Error);
}

TEST(Stable, PositiveStableLaplaceTransform) {
  const double beta = 0.4;
  Rng rng(12);
  const std::size_t n = 50000;
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(-positive_stable(beta, rng));
  EXPECT_NEAR(s / n, std::exp(-1.0), 0.01);
}
