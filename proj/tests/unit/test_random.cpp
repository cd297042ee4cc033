#include "stochreg/random.hpp"

#include "stochreg/errors.hpp"
#include "support/gen.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace stochreg;

// Known-answer vectors published with Random123 (kat_vectors, philox4x32 10 rounds).
TEST(Philox, KnownAnswerZero) {
  const auto r = philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r, (PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
  const auto r = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(r, (PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const auto r = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(r, (PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(IndexStream, SingleIndexIsAlwaysZero) {
  const IndexStream s(123, 0, 1);
  for (std::uint64_t k = 0; k < 1000; ++k) ASSERT_EQ(s[k], 0u);
}

TEST(IndexStream, ZeroSizeRejected) { EXPECT_THROW(IndexStream(1, 0, 0), InputError); }

TEST(IndexStream, ElementsAreAddressable) {
  const IndexStream s(99, 3, 17);
  std::vector<std::size_t> forward;
  for (std::uint64_t k = 0; k < 200; ++k) forward.push_back(s[k]);
  for (std::uint64_t k = 200; k-- > 0;) EXPECT_EQ(s[k], forward[k]);
  const IndexStream again(99, 3, 17);
  EXPECT_EQ(again[150], forward[150]);
}

TEST(IndexStream, FrequencyWithinOnePercent) {
  const IndexStream s(2024, 0, 10);
  std::vector<long> count(10, 0);
  const long draws = 1'000'000;
  for (long k = 0; k < draws; ++k) ++count[s[static_cast<std::uint64_t>(k)]];
  for (long c : count) EXPECT_NEAR(static_cast<double>(c) / draws, 0.1, 0.001);
}

TEST(IndexStream, StreamsAndSeedsDiffer) {
  const IndexStream a(1, 0, 1000), b(1, 1, 1000), c(2, 0, 1000);
  int same_ab = 0, same_ac = 0;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    same_ab += a[k] == b[k];
    same_ac += a[k] == c[k];
  }
  EXPECT_LT(same_ab, 10);
  EXPECT_LT(same_ac, 10);
}

TEST(IndexStream, PropertyInRange) {
  gen::for_all(50, 1, [](gen::Gen& g) {
    const auto n = static_cast<std::size_t>(g.integer(1, 5000));
    const IndexStream s(g.u64(), g.u64(), n);
    for (std::uint64_t k = 0; k < 500; ++k) ASSERT_LT(s[g.u64() >> 4], n);
  });
}

TEST(StandardNormal, MomentsOverManyDraws) {
  const CounterStream s(5, 7);
  const int N = 200000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < N; ++k) {
    const double z = standard_normal(s, static_cast<std::uint64_t>(k));
    ASSERT_TRUE(std::isfinite(z));
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / N, 0.0, 5.0 / std::sqrt(N));
  EXPECT_NEAR(sq / N, 1.0, 5.0 * std::sqrt(2.0 / N));
}

TEST(DeriveSeed, DependsOnEveryTag) {
  const auto a = derive_seed(1, {2, 3});
  EXPECT_EQ(a, derive_seed(1, {2, 3}));
  EXPECT_NE(a, derive_seed(1, {3, 2}));
  EXPECT_NE(a, derive_seed(2, {2, 3}));
  EXPECT_NE(a, derive_seed(1, {2}));
}
