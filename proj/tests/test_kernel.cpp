#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "plab/error.hpp"
#include "plab/kernel.hpp"
#include "test_util.hpp"

using namespace plab;
using plab::testing::normal_vector;

TEST(Kernel, ClosedFormMatchesQuadratureOracle) {
  Rng gen(1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + gen.next_u64() % 20;
    const double gamma = gen.uniform();
    const double s1 = std::exp(gen.uniform(-3, 3)), s2 = std::exp(gen.uniform(-3, 3));
    const auto z1 = normal_vector(gen, d, s1), z2 = normal_vector(gen, d, s2);
    EXPECT_NEAR(phi_closed(z1, z2, gamma, d).value, oracle::phi_quadrature(z1, z2, gamma, d), 1e-8);
  }
}

TEST(Kernel, DiagonalValue) {
  Rng gen(2);
  for (double gamma : {0.0, 0.1, 0.5, 1.0}) {
    const auto z = normal_vector(gen, 7);
    EXPECT_NEAR(phi_closed(z, z, gamma, 7).value, (1 + gamma * gamma) / 2, 1e-12);
  }
}

TEST(Kernel, RangeProperty) {
  Rng gen(3);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t d = 1 + gen.next_u64() % 10;
    const double gamma = gen.uniform();
    const auto z1 = normal_vector(gen, d, std::exp(gen.uniform(-4, 4)));
    const auto z2 = normal_vector(gen, d, std::exp(gen.uniform(-4, 4)));
    const double v = phi_closed(z1, z2, gamma, d).value;
    EXPECT_GT(v, gamma * (1 + gamma) / 2 - 1e-15);
    EXPECT_LE(v, (1 + gamma) / 2 + 1e-15);
  }
}

TEST(Kernel, LambdaMatchesFormulaAndRange) {
  Rng gen(4);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 1 + gen.next_u64() % 10;
    const auto z1 = normal_vector(gen, d, std::exp(gen.uniform(-3, 3)));
    const auto z2 = normal_vector(gen, d, std::exp(gen.uniform(-3, 3)));
    const double l = lambda_factor(z1, z2, d);
    EXPECT_NEAR(l, oracle::lambda_naive(z1, z2, d), 1e-12);
    EXPECT_GT(l, 0.34);
    EXPECT_LE(l, 1.0);
  }
}

// Property: the closed form lies in the bound interval for every pair of distinct inputs.
TEST(Kernel, BoundIntervalContainsClosedForm) {
  Rng gen(5);
  for (int t = 0; t < 5000; ++t) {
    const std::size_t d = 1 + gen.next_u64() % 12;
    const double gamma = gen.uniform() < 0.2 ? 0.0 : gen.uniform();
    const auto z1 = normal_vector(gen, d, std::exp(gen.uniform(-3, 3)));
    auto z2 = normal_vector(gen, d, std::exp(gen.uniform(-3, 3)));
    if (t % 10 == 0) {
      z2 = z1;
      z2[0] += 1e-3;
    }
    const Interval iv = phi_bound(z1, z2, gamma, d);
    const double v = phi_closed(z1, z2, gamma, d).value;
    EXPECT_TRUE(iv.contains(v)) << v << " not in [" << iv.lo << ", " << iv.hi << "]";
  }
  const std::vector<double> z{1.0, 2.0};
  EXPECT_THROW(phi_bound(z, z, 0.0, 2), Error);
}

TEST(Kernel, MonteCarloIsUnbiasedAndDeterministic) {
  Rng gen(6);
  const std::size_t d = 3;
  const auto z1 = normal_vector(gen, d), z2 = normal_vector(gen, d);
  const PhiEstimate a = phi_mc(z1, z2, 0.2, d, 100000, 9);
  const PhiEstimate b = phi_mc(z1, z2, 0.2, d, 100000, 9);
  EXPECT_EQ(a.value, b.value);
  EXPECT_GT(a.std_error, 0.0);
  EXPECT_EQ(a.samples, 100000u);
  EXPECT_LE(std::abs(a.value - phi_closed(z1, z2, 0.2, d).value), 5 * a.std_error);
  const std::vector<double> gammas{0.0, 0.2, 0.7};
  const auto multi = phi_mc(z1, z2, gammas, d, 100000, 9);
  ASSERT_EQ(multi.size(), 3u);
  EXPECT_EQ(multi[1].value, a.value);
}

TEST(Kernel, CorrelationClampAndChecks) {
  EXPECT_DOUBLE_EQ(preact_correlation(0.0, 0.0, 0.0, 5), 1.0);
  EXPECT_NO_THROW(phi_closed_from_stats(2.0 + 1e-12, 2.0, 2.0, 0.0, 2));
  EXPECT_THROW(phi_closed_from_stats(10.0, 1.0, 1.0, 0.0, 2), Error);
  const std::vector<double> a{1.0}, b{1.0, 2.0};
  EXPECT_THROW(phi_closed(a, b, 0.0, 1), Error);
}
