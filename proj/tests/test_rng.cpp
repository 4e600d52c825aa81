#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "plab/rng.hpp"

using namespace plab;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t base = 0; base < 20; ++base) {
    for (std::uint64_t s = 0; s < 50; ++s) seen.insert(derive_seed(base, s));
    seen.insert(derive_seed(base, "data"));
    seen.insert(derive_seed(base, "net_f"));
  }
  EXPECT_EQ(seen.size(), 20u * 52u);
  EXPECT_NE(derive_seed(0, "data"), derive_seed(0, "datb"));
}

TEST(Rng, UniformRange) {
  Rng r(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(7);
  const int n = 400000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  EXPECT_NEAR(s1 / n, 0.0, 5 * std::sqrt(1.0 / n));
  EXPECT_NEAR(s2 / n, 1.0, 5 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 5 * std::sqrt(96.0 / n));
}

TEST(Rng, SignIsBalanced) {
  Rng r(3);
  const int n = 100000;
  int s = 0;
  for (int i = 0; i < n; ++i) {
    const int v = r.sign();
    ASSERT_TRUE(v == 1 || v == -1);
    s += v;
  }
  EXPECT_LE(std::abs(s), 5 * std::sqrt(static_cast<double>(n)));
}
