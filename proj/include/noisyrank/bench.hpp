#pragma once

// Simulation sweeps against a noisy oracle, the L ln L scaling fit, and
// sampler quality against the brute-force posterior.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noisyrank/core_model.hpp"
#include "noisyrank/engine.hpp"
#include "noisyrank/samplers.hpp"

#include <json.hpp>

namespace noisyrank::bench {

enum class ErrorModelMode { Known, Unknown };

const char* to_string(ErrorModelMode mode) noexcept;

struct SweepConfig {
  std::vector<std::size_t> L_values{8, 16};
  std::vector<double> p_values{0.9};
  std::vector<std::size_t> N_values{100};
  double epsilon = 0.01;
  std::size_t trials_per_cell = 20;
  std::vector<QueryStrategy> strategies{QueryStrategy::FullPairs};
  ErrorModelMode error_model_mode = ErrorModelMode::Known;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::optional<std::uint64_t> max_questions;

  /// Throws ValidationError.
  void validate() const;

  /// Keys: L_values, p_values, N_values, epsilon, trials_per_cell,
  /// query_strategy ("full" | "adjacent" | list), error_model_mode
  /// ("known" | "unknown"), seed, jobs, max_questions. Missing keys keep
  /// their defaults; unknown keys are rejected.
  static SweepConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SweepRow {
  std::size_t L = 0;
  double p = 0.0;
  std::size_t N = 0;
  double epsilon = 0.0;
  QueryStrategy strategy = QueryStrategy::FullPairs;
  std::size_t trials = 0;
  double mean_questions = 0.0;
  double questions_stddev = 0.0;
  double failure_rate = 0.0;
  double mean_wall_millis = 0.0;
  double mean_middle_partition_len = 0.0;
  /// Trials that threw; they count as failures.
  std::size_t errors = 0;
  /// Mean per-question selection time in microseconds. Not part of the CSV.
  double mean_selection_micros = 0.0;
};

struct TrialOutcome {
  std::uint64_t questions = 0;
  bool converged = false;
  bool failed = true;
  double wall_millis = 0.0;
  double middle_partition_len = 0.0;
  double selection_micros = 0.0;
  std::string error;
};

struct TrialSpec {
  std::size_t L = 0;
  double p = 0.9;
  std::size_t N = 100;
  double epsilon = 0.01;
  QueryStrategy strategy = QueryStrategy::FullPairs;
  ErrorModelMode mode = ErrorModelMode::Known;
  std::optional<std::uint64_t> max_questions;
};

/// One simulated session with a fresh random true order; `seed` determines
/// everything except wall time.
TrialOutcome run_trial(const TrialSpec& spec, std::uint64_t seed);

/// Failure means non-convergence or a converged modal order that is not the
/// true order.
std::vector<SweepRow> run_sweep(const SweepConfig& config);

inline constexpr const char* kSweepCsvHeader =
    "L,p,N,epsilon,strategy,trials,mean_questions,questions_stddev,failure_rate,mean_wall_millis,"
    "mean_middle_partition_len";

/// With `include_timing` false the wall-time column is written as 0 so the
/// output is a pure function of the config.
std::string format_sweep_csv(std::span<const SweepRow> rows, bool include_timing = true);

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares of mean_questions against L ln L. Throws InputError with
/// fewer than three distinct L values.
ScalingFit fit_scaling(std::span<const SweepRow> rows);

using Distribution = std::map<Ordering, double>;

double total_variation(const Distribution& a, const Distribution& b);

/// Exact output distribution of max_element_sample for a known p, by
/// enumerating every selection chain with disputes recomputed from the count
/// matrix.
Distribution max_element_chain_distribution(const MeasurementLog& log, const ErrorModel& model);

/// Exact output distribution of recursive_partition_sample for a known p.
Distribution recursive_partition_distribution(const MeasurementLog& log, const ErrorModel& model);

struct SamplerQuality {
  SamplerKind sampler = SamplerKind::Naive;
  std::size_t samples = 0;
  /// Empirical TV distance to the brute-force posterior.
  double tv = 0.0;
  /// Expected empirical TV of an exact sampler at this sample size.
  double noise_floor = 0.0;
  /// TV between the sampler's exact output law and the posterior; NaN when
  /// not computable (unknown p).
  double analytic_tv = 0.0;
};

inline constexpr std::size_t kQualityMaxSize = 6;

/// Runs the naive, recursive-partition and max-element samplers from scratch
/// `samples` times each. Throws InputError for L > kQualityMaxSize.
std::vector<SamplerQuality> sampler_quality_report(const MeasurementLog& log, const ErrorModel& model,
                                                   std::size_t samples, std::uint64_t seed);

/// Histogram of `samples` draws of one from-scratch sampler.
Distribution empirical_distribution(SamplerKind sampler, const MeasurementLog& log, const ErrorModel& model,
                                    std::size_t samples, std::uint64_t seed);

}  // namespace noisyrank::bench
