#pragma once

// Self-checks against brute-force and analytic oracles. `quick` covers the
// small-L exactness and invariant checks; `full` adds the simulation
// criteria.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace noisyrank::verify {

enum class Level { Quick, Full };

/// Accepts "quick" / "full". Throws ValidationError otherwise.
Level parse_level(const std::string& text);

struct CheckResult {
  std::string id;    // "1" .. "10", or "1q" style for reduced quick variants
  std::string name;
  bool passed = false;
  /// Measured statistic, the bound it is held to, and how far inside
  /// (positive) or outside (negative) the bound it landed.
  double value = 0.0;
  double threshold = 0.0;
  double margin = 0.0;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  std::uint64_t seed = 20240601;
  /// Replaces the survival probability of inconsistent candidates in the
  /// two-element exactness check. Used to plant a fault.
  std::function<double(double f)> keep_ratio;
  /// Progress lines go here when set.
  std::function<void(const CheckResult&)> on_result;
};

CheckResult two_element_exactness(const Options& options, std::size_t ensemble_size = 100000);
CheckResult naive_sampler_exactness(const Options& options, std::size_t max_dimension = 5,
                                    std::size_t samples = 100000);
CheckResult partition_gap(const Options& options, std::size_t samples = 100000);
CheckResult unknown_p_consistency(const Options& options, std::size_t pairs = 100);
CheckResult accept_ratio_statistics(const Options& options, std::size_t trials = 10000);
CheckResult end_to_end(const Options& options, std::size_t trials = 100);
CheckResult scaling_law(const Options& options, std::size_t trials = 20);
CheckResult adjacent_strategy(const Options& options, std::size_t trials = 100);
CheckResult determinism_and_recovery(const Options& options);
CheckResult dispute_bookkeeping(const Options& options, std::size_t max_dimension = 256);

std::vector<CheckResult> run(Level level, const Options& options);

bool all_passed(const std::vector<CheckResult>& results);

/// {"level", "seed", "passed", "checks": [{id, name, passed, value,
/// threshold, margin, detail, seconds}]}
nlohmann::json report_json(Level level, std::uint64_t seed, const std::vector<CheckResult>& results);

/// One line: "[PASS] 3 name: detail (margin ..., 1.2 s)".
std::string format_line(const CheckResult& r);

}  // namespace noisyrank::verify
