#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "noisyrank/random.hpp"

namespace noisyrank {
namespace {

TEST(RandomStream, DrawsArePureFunctionsOfSeedAndCounter) {
  RandomStream a(42);
  for (int k = 0; k < 10; ++k) a.next_u64();
  RandomStream b(42, 10);
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomStream, DerivedStreamsDiffer) {
  auto a = RandomStream::derive(7, {1, 2});
  auto b = RandomStream::derive(7, {2, 1});
  auto c = RandomStream::derive(7, {1, 2});
  const auto x = a.next_u64();
  EXPECT_NE(x, b.next_u64());
  EXPECT_EQ(x, c.next_u64());
}

TEST(RandomStream, UniformRangeAndMean) {
  RandomStream r(3);
  double sum = 0;
  for (int k = 0; k < 100000; ++k) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(RandomStream, UniformIndexIsUnbiased) {
  RandomStream r(4);
  std::vector<int> hist(7, 0);
  for (int k = 0; k < 70000; ++k) ++hist[r.uniform_index(7)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 400);
}

TEST(RandomStream, ShuffleIsAPermutationAndCoversAllOrders) {
  RandomStream r(5);
  std::map<std::vector<int>, int> seen;
  for (int k = 0; k < 6000; ++k) {
    std::vector<int> v{0, 1, 2};
    r.shuffle(std::span<int>(v));
    ++seen[v];
  }
  ASSERT_EQ(seen.size(), 6u);
  for (const auto& [v, n] : seen) EXPECT_NEAR(n, 1000, 120);
}

}  // namespace
}  // namespace noisyrank
