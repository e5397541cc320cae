#include <gtest/gtest.h>

#include "noisyrank/verify.hpp"

namespace noisyrank::verify {
namespace {

TEST(Verify, LevelParsing) {
  EXPECT_EQ(parse_level("quick"), Level::Quick);
  EXPECT_EQ(parse_level("full"), Level::Full);
  EXPECT_ANY_THROW(parse_level("medium"));
}

TEST(Verify, TwoElementCheckPasses) {
  const CheckResult r = two_element_exactness(Options{}, 20000);
  EXPECT_TRUE(r.passed) << r.detail;
}

// Swapping the keep probability for its reciprocal must be caught.
TEST(Verify, InvertedKeepRatioIsDetected) {
  Options o;
  o.keep_ratio = [](double f) { return f / (1.0 - f); };
  const CheckResult r = two_element_exactness(o, 20000);
  EXPECT_FALSE(r.passed) << r.detail;
  EXPECT_LT(r.margin, 0.0);
}

TEST(Verify, PartitionGapReportsDiscrepancy) {
  const CheckResult r = partition_gap(Options{}, 50000);
  EXPECT_TRUE(r.passed) << r.detail;
  EXPECT_NE(r.detail.find("DISCREPANCY"), std::string::npos);
}

TEST(Verify, BookkeepingAndRecovery) {
  EXPECT_TRUE(dispute_bookkeeping(Options{}, 32).passed);
  EXPECT_TRUE(determinism_and_recovery(Options{}).passed);
}

TEST(Verify, ReportShape) {
  std::vector<CheckResult> rs{{"1", "one", true, 0.1, 0.2, 0.1, "ok", 0.5}, {"2", "two", false, 3, 1, -2, "bad", 1}};
  EXPECT_FALSE(all_passed(rs));
  const auto j = report_json(Level::Quick, 7, rs);
  EXPECT_EQ(j.at("checks").size(), 2u);
  EXPECT_EQ(j.at("seed"), 7);
  EXPECT_NE(format_line(rs[1]).find("[FAIL]"), std::string::npos);
  rs.pop_back();
  EXPECT_TRUE(all_passed(rs));
}

}  // namespace
}  // namespace noisyrank::verify
