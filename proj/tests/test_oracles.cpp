#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <thread>

#include "noisyrank/errors.hpp"
#include "noisyrank/oracles.hpp"

namespace noisyrank {
namespace {

TEST(SimulatedOracle, NoiselessIsAlwaysTruthful) {
  const Ordering truth({3, 0, 2, 1});
  SimulatedOracle o(truth, 1.0, RandomStream(1));
  for (int k = 0; k < 1000; ++k) {
    for (ElementId i = 0; i < 4; ++i) {
      for (ElementId j = i + 1; j < 4; ++j) {
        const Response r = *o.ask(i, j);
        EXPECT_TRUE(truth.precedes(r.lesser, r.greater));
      }
    }
  }
}

TEST(SimulatedOracle, ErrorRateWithinConfidenceInterval) {
  const std::size_t asks = 10000;
  SimulatedOracle o(Ordering::identity(2), 0.8, RandomStream(2));
  std::size_t truthful = 0;
  for (std::size_t k = 0; k < asks; ++k) truthful += o.ask(0, 1)->lesser == 0;
  EXPECT_NEAR(static_cast<double>(truthful) / asks, 0.8, 2.576 * std::sqrt(0.16 / asks));
  EXPECT_EQ(o.asks(), asks);
}

TEST(SimulatedOracle, ErrorsSeriallyUncorrelated) {
  const std::size_t asks = 20000;
  SimulatedOracle o(Ordering::identity(2), 0.7, RandomStream(3));
  std::vector<double> err(asks);
  for (std::size_t k = 0; k < asks; ++k) err[k] = o.ask(0, 1)->lesser == 1 ? 1.0 : 0.0;
  double mean = 0;
  for (double e : err) mean += e;
  mean /= asks;
  double cov = 0, var = 0;
  for (std::size_t k = 0; k + 1 < asks; ++k) cov += (err[k] - mean) * (err[k + 1] - mean);
  for (double e : err) var += (e - mean) * (e - mean);
  EXPECT_LT(std::abs(cov / var), 3.0 / std::sqrt(static_cast<double>(asks)));
}

TEST(SimulatedOracle, ResponsesNameOnlyTheAskedPair) {
  SimulatedOracle o(Ordering({4, 2, 0, 1, 3}), 0.6, RandomStream(4));
  for (ElementId i = 0; i < 5; ++i) {
    for (ElementId j = 0; j < 5; ++j) {
      if (i == j) continue;
      const Response r = *o.ask(i, j);
      EXPECT_TRUE((r.lesser == i && r.greater == j) || (r.lesser == j && r.greater == i));
    }
  }
}

TEST(SimulatedOracle, RejectsBadP) {
  EXPECT_THROW(SimulatedOracle(Ordering::identity(2), 0.5, RandomStream(0)), ValidationError);
  EXPECT_THROW(SimulatedOracle(Ordering::identity(2), 1.1, RandomStream(0)), ValidationError);
}

TEST(ScriptedOracle, ReplaysAndChecksPairs) {
  ScriptedOracle s({{1, 0}, {2, 1}});
  EXPECT_EQ(*s.ask(0, 1), (Response{1, 0}));
  EXPECT_THROW(s.ask(0, 2), ReplayError);
  ScriptedOracle t({{1, 0}});
  t.ask(1, 0);
  EXPECT_EQ(t.remaining(), 0u);
  EXPECT_THROW(t.ask(0, 1), ReplayError);
}

TEST(ScriptedOracle, FromJournal) {
  MeasurementLog log(3);
  log.append(2, 0);
  log.append(1, 2);
  ScriptedOracle s = ScriptedOracle::from_journal(log);
  EXPECT_EQ(*s.ask(0, 2), (Response{2, 0}));
  EXPECT_EQ(*s.ask(2, 1), (Response{1, 2}));
}

TEST(InteractiveOracle, SuspendsWithoutAnswer) {
  InteractiveOracle o;
  EXPECT_THROW(o.post({0, 1}), StateError);
  EXPECT_FALSE(o.ask(0, 1).has_value());
  ASSERT_TRUE(o.pending().has_value());
  EXPECT_THROW(o.post({0, 2}), InputError);
  o.post({1, 0});
  EXPECT_EQ(*o.ask(0, 1), (Response{1, 0}));
}

TEST(InteractiveOracle, WaitsForAnswerFromAnotherThread) {
  InteractiveOracle o(std::chrono::milliseconds(5000));
  std::thread poster([&] {
    while (!o.pending()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    o.post({0, 1});
  });
  const auto r = o.ask(0, 1);
  poster.join();
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(*r, (Response{0, 1}));
}

}  // namespace
}  // namespace noisyrank
