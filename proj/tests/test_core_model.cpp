#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "noisyrank/core_model.hpp"
#include "noisyrank/errors.hpp"
#include "noisyrank/random.hpp"
#include "test_util.hpp"

namespace noisyrank {
namespace {

using test::random_log;
using test::random_order;

TEST(Ordering, RejectsNonPermutations) {
  EXPECT_THROW(Ordering({0, 0, 1}), InputError);
  EXPECT_THROW(Ordering({0, 2}), InputError);
  EXPECT_NO_THROW(Ordering({2, 0, 1}));
}

TEST(Ordering, PositionsAndReverse) {
  const Ordering o({2, 0, 1});
  EXPECT_EQ(o.positions(), (std::vector<std::uint32_t>{1, 2, 0}));
  EXPECT_TRUE(o.precedes(2, 1));
  EXPECT_FALSE(o.precedes(1, 0));
  EXPECT_EQ(o.reversed(), Ordering({1, 0, 2}));
  EXPECT_NE(o.key(), o.reversed().key());
}

TEST(MeasurementLog, SingleAppend) {
  MeasurementLog log(2);
  const auto& m = log.append(0, 1);
  EXPECT_EQ(m.sequence_number, 1u);
  EXPECT_EQ(log.size(), 1u);
  EXPECT_EQ(log.count(0, 1), 1u);
}

TEST(MeasurementLog, ContradictoryRecordsCoexist) {
  MeasurementLog log(2);
  log.append(0, 1);
  log.append(1, 0);
  EXPECT_EQ(log.size(), 2u);
  EXPECT_EQ(log.count(0, 1), 1u);
  EXPECT_EQ(log.count(1, 0), 1u);
}

TEST(MeasurementLog, RejectsBadRecords) {
  MeasurementLog log(3);
  EXPECT_THROW(log.append(1, 1), InputError);
  EXPECT_THROW(log.append(0, 3), InputError);
  EXPECT_TRUE(log.empty());
}

TEST(MeasurementLog, RecordMeasurementIsValueReturning) {
  const MeasurementLog empty(3);
  const MeasurementLog one = record_measurement(empty, 2, 0);
  EXPECT_TRUE(empty.empty());
  EXPECT_EQ(one.count(2, 0), 1u);
}

TEST(MeasurementLog, FromRecordsNeedsContiguousSequence) {
  const std::vector<Measurement> good{{0, 1, 1}, {1, 2, 2}};
  EXPECT_EQ(MeasurementLog::from_records(3, good).size(), 2u);
  const std::vector<Measurement> gap{{0, 1, 1}, {1, 2, 3}};
  EXPECT_THROW(MeasurementLog::from_records(3, gap), InputError);
}

TEST(MeasurementLog, CountsMatchRecomputationOnLongJournals) {
  auto rng = RandomStream::derive(1, {});
  const MeasurementLog log = random_log(17, 10000, rng);
  EXPECT_TRUE(log.counts_consistent());
  std::uint64_t total = 0;
  for (ElementId i = 0; i < 17; ++i) {
    EXPECT_EQ(log.count(i, i), 0u);
    for (ElementId j = 0; j < 17; ++j) total += log.count(i, j);
  }
  EXPECT_EQ(total, 10000u);
  const auto replayed = MeasurementLog::from_records(17, log.records());
  EXPECT_TRUE(std::equal(replayed.counts().begin(), replayed.counts().end(), log.counts().begin()));
}

TEST(MeasurementLog, LostToAndBeatenLists) {
  MeasurementLog log(4);
  log.append(0, 1);
  log.append(0, 1);
  log.append(0, 2);
  log.append(3, 0);
  const std::set<ElementId> lost(log.lost_to(0).begin(), log.lost_to(0).end());
  const std::set<ElementId> beaten(log.beaten(0).begin(), log.beaten(0).end());
  EXPECT_EQ(lost, (std::set<ElementId>{1, 2}));
  EXPECT_EQ(beaten, (std::set<ElementId>{3}));
}

TEST(NMatch, EmptyLogIsZero) {
  EXPECT_EQ(n_match(Ordering({1, 0, 2}), MeasurementLog(3)), 0u);
}

TEST(NMatch, TwoElements) {
  MeasurementLog log(2);
  log.append(0, 1);
  EXPECT_EQ(n_match(Ordering({0, 1}), log), 1u);
  EXPECT_EQ(n_match(Ordering({1, 0}), log), 0u);
}

TEST(NMatch, AgreesWithDirectScanOnEveryOrder) {
  auto rng = RandomStream::derive(2, {});
  const MeasurementLog log = random_log(4, 6, rng);
  std::vector<ElementId> perm{0, 1, 2, 3};
  do {
    const Ordering o(perm);
    std::uint64_t direct = 0;
    for (const auto& m : log.records()) {
      const auto a = std::find(perm.begin(), perm.end(), m.lesser);
      const auto b = std::find(perm.begin(), perm.end(), m.greater);
      direct += a < b;
    }
    const auto got = n_match(o, log);
    EXPECT_EQ(got, direct);
    EXPECT_LE(got, 6u);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST(NMatch, OrderAndReverseSumToN) {
  auto rng = RandomStream::derive(3, {});
  for (int k = 0; k < 50; ++k) {
    const std::size_t dim = 2 + rng.uniform_index(20);
    const MeasurementLog log = random_log(dim, rng.uniform_index(40), rng);
    const Ordering o = random_order(dim, rng);
    EXPECT_EQ(n_match(o, log) + n_match(o.reversed(), log), log.size());
  }
}

TEST(NMatch, DimensionMismatchThrows) {
  EXPECT_THROW(n_match(Ordering({0, 1}), MeasurementLog(3)), InputError);
}

TEST(NDispute, Examples) {
  MeasurementLog log(3);
  log.append(0, 1);  // a < b
  const std::vector<ElementId> all{0, 1, 2};
  EXPECT_EQ(n_dispute(0, all, log), 1u);
  EXPECT_EQ(n_dispute(1, all, log), 0u);
  EXPECT_EQ(n_dispute(2, all, log), 0u);
  const std::vector<ElementId> without_b{0, 2};
  EXPECT_EQ(n_dispute(0, without_b, log), 0u);
  const std::vector<ElementId> alone{0};
  EXPECT_EQ(n_dispute(0, alone, log), 0u);
  EXPECT_THROW(n_dispute(1, without_b, log), InputError);
}

TEST(PosteriorWeight, EmptyLogIsWeightOne) {
  EXPECT_DOUBLE_EQ(posterior_weight(Ordering({1, 0}), MeasurementLog(2), ErrorModel::known(0.8)), 0.0);
}

TEST(PosteriorWeight, KnownPRatioIsFour) {
  MeasurementLog log(2);
  log.append(0, 1);
  const auto model = ErrorModel::known(0.8);
  const double ratio = std::exp(posterior_weight(Ordering({0, 1}), log, model) -
                                posterior_weight(Ordering({1, 0}), log, model));
  EXPECT_NEAR(ratio, 4.0, 1e-12);
}

TEST(PosteriorWeight, UnknownPFactorialRatios) {
  const auto model = ErrorModel::unknown();
  EXPECT_NEAR(std::exp(posterior_log_weight(2, 2, model) - posterior_log_weight(2, 0, model)), 1.0, 1e-12);
  EXPECT_NEAR(std::exp(posterior_log_weight(2, 2, model) - posterior_log_weight(2, 1, model)), 6.0 / 4.0, 1e-12);
}

TEST(PosteriorWeight, CertainChannelExcludesContradictions) {
  MeasurementLog log(2);
  log.append(0, 1);
  const auto model = ErrorModel::known(1.0);
  EXPECT_TRUE(std::isinf(posterior_weight(Ordering({1, 0}), log, model)));
  EXPECT_EQ(posterior_weight(Ordering({0, 1}), log, model), 0.0);
}

TEST(ErrorModel, Domain) {
  EXPECT_THROW(ErrorModel::known(0.5), ValidationError);
  EXPECT_THROW(ErrorModel::known(1.01), ValidationError);
  EXPECT_THROW(ErrorModel::known(std::nan("")), ValidationError);
  EXPECT_NO_THROW(ErrorModel::known(1.0));
  EXPECT_NO_THROW(ErrorModel::known_unchecked(0.5));
  try {
    ErrorModel::known(0.3);
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "p");
  }
}

TEST(FNext, Examples) {
  const auto unknown = ErrorModel::unknown();
  EXPECT_DOUBLE_EQ(f_next(unknown, {0, 0}), 0.5);
  EXPECT_NEAR(f_next(unknown, {10, 10}), 12.0 / 14.0, 1e-15);
  EXPECT_DOUBLE_EQ(f_next(ErrorModel::known(0.9), {7, 3}), 0.9);
}

TEST(FNext, UnknownPMonotoneAndInsideUnitInterval) {
  const auto model = ErrorModel::unknown();
  for (std::uint64_t n = 0; n < 60; ++n) {
    for (std::uint64_t m = 0; m <= n; ++m) {
      const double f = f_next(model, {n, m});
      EXPECT_GT(f, 0.0);
      EXPECT_LT(f, 1.0);
      if (m < n) {
        EXPECT_LT(f, f_next(model, {n, m + 1}));
      }
      EXPECT_GT(f, f_next(model, {n + 1, m}));
    }
  }
}

TEST(BruteForce, TwoElements) {
  MeasurementLog log(2);
  log.append(0, 1);
  for (double p : {0.6, 0.8, 0.95}) {
    const auto post = brute_force_posterior(log, ErrorModel::known(p));
    EXPECT_NEAR(post.at(Ordering({0, 1})), p, 1e-12);
    EXPECT_NEAR(post.at(Ordering({1, 0})), 1 - p, 1e-12);
  }
}

TEST(BruteForce, UniformOnEmptyLog) {
  const auto post = brute_force_posterior(MeasurementLog(3), ErrorModel::known(0.8));
  ASSERT_EQ(post.size(), 6u);
  for (const auto& [o, p] : post) EXPECT_NEAR(p, 1.0 / 6.0, 1e-12);
}

TEST(BruteForce, ThreeElementsOneRecord) {
  MeasurementLog log(3);
  log.append(0, 1);
  const auto post = brute_force_posterior(log, ErrorModel::known(0.8));
  for (const auto& [o, p] : post) {
    if (o.precedes(0, 1)) {
      EXPECT_NEAR(p, 0.2667, 5e-5);
    } else {
      EXPECT_NEAR(p, 0.0667, 5e-5);
    }
  }
}

TEST(BruteForce, SumsToOneAndIsRelabelingEquivariant) {
  auto rng = RandomStream::derive(4, {});
  for (int k = 0; k < 10; ++k) {
    const std::size_t dim = 2 + rng.uniform_index(4);
    const MeasurementLog log = random_log(dim, rng.uniform_index(10), rng);
    const ErrorModel model = k % 2 ? ErrorModel::unknown() : ErrorModel::known(0.75);
    const auto post = brute_force_posterior(log, model);
    double total = 0.0;
    for (const auto& [o, p] : post) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);

    const Ordering sigma = random_order(dim, rng);  // relabel e -> sigma[e]
    MeasurementLog relabeled(dim);
    for (const auto& m : log.records()) relabeled.append(sigma[m.lesser], sigma[m.greater]);
    const auto post2 = brute_force_posterior(relabeled, model);
    for (const auto& [o, p] : post) {
      std::vector<ElementId> mapped;
      for (ElementId e : o) mapped.push_back(sigma[e]);
      EXPECT_NEAR(post2.at(Ordering(mapped)), p, 1e-12);
    }
  }
}

TEST(BruteForce, RefusesLargeLists) {
  EXPECT_THROW(brute_force_posterior(MeasurementLog(9), ErrorModel::known(0.8)), InputError);
}

TEST(UnknownP, SequentialFactorsMatchWeightRatio) {
  const auto model = ErrorModel::unknown();
  auto rng = RandomStream::derive(5, {});
  for (int k = 0; k < 100; ++k) {
    const std::size_t dim = 2 + rng.uniform_index(6);
    const MeasurementLog log = random_log(dim, rng.uniform_index(21), rng);
    const Ordering a = random_order(dim, rng);
    const Ordering b = random_order(dim, rng);
    auto sequential = [&](const Ordering& o) {
      const auto pos = o.positions();
      SampleBookkeeping bk;
      double s = 0;
      for (const auto& m : log.records()) {
        const bool match = pos[m.lesser] < pos[m.greater];
        const double f = f_next(model, bk);
        s += std::log(match ? f : 1 - f);
        ++bk.n_seen;
        bk.n_match += match;
      }
      EXPECT_EQ(bk, (SampleBookkeeping{log.size(), n_match(o, log)}));
      return s;
    };
    const double lhs = sequential(a) - sequential(b);
    const double rhs = posterior_weight(a, log, model) - posterior_weight(b, log, model);
    EXPECT_LT(std::abs(std::expm1(lhs - rhs)), 1e-9);
  }
}

}  // namespace
}  // namespace noisyrank
