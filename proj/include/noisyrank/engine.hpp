#pragma once

// The adiabatic Monte Carlo sorting loop: an ensemble of N candidate
// orderings is updated in place after every judgement, the next question is
// the pair the ensemble is most split on, and the loop stops once one
// ordering holds more than 1 - epsilon of the ensemble.

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noisyrank/core_model.hpp"
#include "noisyrank/oracles.hpp"
#include "noisyrank/random.hpp"
#include "noisyrank/samplers.hpp"

namespace noisyrank {

enum class QueryStrategy { FullPairs, AdjacentPairs };

const char* to_string(QueryStrategy strategy) noexcept;
/// Accepts "full" / "adjacent". Throws ValidationError otherwise.
QueryStrategy parse_query_strategy(const std::string& text);

struct EngineConfig {
  std::size_t ensemble_size = 100;
  double epsilon = 0.01;
  QueryStrategy strategy = QueryStrategy::FullPairs;
  /// Below this many judgements, middle stretches are resampled with the
  /// recursive-partition sampler. Defaults to L.
  std::optional<std::uint64_t> warm_start_threshold;
  /// Defaults to ceil(50 L ln L).
  std::optional<std::uint64_t> max_questions;
  std::uint64_t seed = 0;

  /// Throws ValidationError naming the first bad field.
  void validate() const;
  std::uint64_t warm_start_for(std::size_t dimension) const;
  std::uint64_t max_questions_for(std::size_t dimension) const;
};

struct Candidate {
  Ordering order;
  SampleBookkeeping bk;
};

/// Unordered pair with i < j.
struct QueryPair {
  ElementId i = 0;
  ElementId j = 0;

  bool operator==(const QueryPair&) const = default;
};

/// Upper-triangular table indexed by unordered pairs.
template <typename T>
class PairTable {
 public:
  PairTable() = default;
  PairTable(std::size_t dimension, T init)
      : dimension_(dimension), cells_(dimension < 2 ? 0 : dimension * (dimension - 1) / 2, init) {}

  T& at(ElementId a, ElementId b) { return cells_[index(a, b)]; }
  const T& at(ElementId a, ElementId b) const { return cells_[index(a, b)]; }

 private:
  std::size_t index(ElementId a, ElementId b) const {
    const std::size_t i = a < b ? a : b;
    const std::size_t j = a < b ? b : a;
    return i * (2 * dimension_ - i - 1) / 2 + (j - i - 1);
  }

  std::size_t dimension_ = 0;
  std::vector<T> cells_;
};

/// N candidate orderings plus two maintained tables: for every pair i < j,
/// how many candidates put i before j, and in how many the two are adjacent.
/// Pairs adjacent in at least one candidate are also kept as a set.
class Ensemble {
 public:
  Ensemble() = default;
  /// N independent uniform permutations. Throws InputError for L < 2.
  static Ensemble uniform(std::size_t dimension, std::size_t size, std::uint64_t seed);
  /// Builds the tables for given candidates; all must be permutations of [0, L).
  explicit Ensemble(std::vector<Candidate> candidates);

  std::size_t size() const noexcept { return candidates_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }
  const Candidate& operator[](std::size_t k) const { return candidates_[k]; }
  std::span<const Candidate> candidates() const noexcept { return candidates_; }

  /// N_ij: number of candidates with i before j.
  std::uint32_t pair_count(ElementId i, ElementId j) const {
    const auto c = before_.at(i, j);
    return i < j ? c : static_cast<std::uint32_t>(candidates_.size()) - c;
  }

  std::uint32_t adjacency_count(ElementId i, ElementId j) const { return adjacent_.at(i, j); }
  std::span<const QueryPair> adjacent_pairs() const noexcept { return adjacent_set_; }

  /// Replaces candidate k. Positions outside [begin, end) must be unchanged.
  void replace(std::size_t k, Candidate next, std::size_t begin, std::size_t end);
  void replace(std::size_t k, Candidate next) { replace(k, std::move(next), 0, dimension_); }
  void set_bookkeeping(std::size_t k, SampleBookkeeping bk) { candidates_[k].bk = bk; }

  /// Recomputes both tables from the candidates and compares.
  bool tables_consistent() const;

 private:
  void add_pairs(std::span<const ElementId> perm, std::size_t begin, std::size_t end, int sign);
  void add_adjacent(ElementId a, ElementId b, int sign);

  std::size_t dimension_ = 0;
  std::vector<Candidate> candidates_;
  PairTable<std::uint32_t> before_;
  PairTable<std::uint32_t> adjacent_;
  PairTable<std::int32_t> adjacent_slot_;
  std::vector<QueryPair> adjacent_set_;
};

Ensemble init_ensemble(std::size_t dimension, const EngineConfig& config);

/// The pairs a strategy considers, sorted.
std::vector<QueryPair> scanned_pairs(const Ensemble& ensemble, QueryStrategy strategy);

/// A pair minimizing (N_ij - N_ji)^2 over the strategy's scanned set; ties
/// are broken uniformly at random.
QueryPair select_query(const Ensemble& ensemble, QueryStrategy strategy, RandomStream& rng);

struct ApplyStats {
  std::size_t consistent = 0;
  std::size_t kept_inconsistent = 0;
  std::size_t resampled = 0;
  std::size_t fallbacks = 0;
  double middle_length_mean = 0.0;
};

/// Runs incremental_resample on every candidate. Candidate k draws from the
/// substream (seed, k, m.sequence_number), so the result does not depend on
/// processing order. `log` must already end with `m`.
ApplyStats apply_measurement(Ensemble& ensemble, const Measurement& m, const MeasurementLog& log,
                             const ErrorModel& model, const EngineConfig& config,
                             const ResampleOptions& base_options = {});

struct Convergence {
  bool converged = false;
  Ordering modal_order;
  double modal_fraction = 0.0;
};

/// Modal candidate by exact equality; converged iff its share > 1 - epsilon.
/// Ties go to the candidate with the lowest index.
Convergence check_convergence(const Ensemble& ensemble, double epsilon);

enum class EngineStatus { AwaitingAnswer, Converged, Exhausted };

const char* to_string(EngineStatus status) noexcept;

struct TraceEntry {
  std::uint64_t q_index = 0;
  QueryPair pair;
  ElementId response = 0;  // the element judged lesser
  double modal_fraction = 0.0;
  double middle_length_mean = 0.0;
};

/// CSV with header q_index,i,j,response,modal_fraction,middle_partition_len_mean.
std::string format_trace_csv(std::span<const TraceEntry> trace);

struct SortResult {
  Ordering modal_order;
  double modal_fraction = 0.0;
  std::uint64_t questions_asked = 0;
  bool converged = false;
  EngineStatus status = EngineStatus::AwaitingAnswer;
  /// The oracle had no answer; call Engine::run again to resume.
  bool suspended = false;
  std::vector<TraceEntry> trace;
};

/// One sorting session. Every random choice is drawn from a substream of
/// config.seed keyed by the judgement count, so the state is a pure function
/// of (L, model, config, journal).
class Engine {
 public:
  Engine(std::size_t dimension, ErrorModel model, EngineConfig config);

  /// Rebuilds an engine by feeding `journal` through submit(). Throws
  /// ReplayError if a record does not answer the question the engine asks.
  static Engine replay(std::size_t dimension, ErrorModel model, EngineConfig config, const MeasurementLog& journal);

  std::size_t dimension() const noexcept { return dimension_; }
  const ErrorModel& model() const noexcept { return model_; }
  const EngineConfig& config() const noexcept { return config_; }
  const MeasurementLog& log() const noexcept { return log_; }
  const Ensemble& ensemble() const noexcept { return ensemble_; }
  const Convergence& convergence() const noexcept { return convergence_; }
  EngineStatus status() const noexcept { return status_; }
  std::uint64_t questions_asked() const noexcept { return log_.size(); }
  std::span<const TraceEntry> trace() const noexcept { return trace_; }

  /// Pending question; set iff status() == AwaitingAnswer.
  const std::optional<QueryPair>& pending() const noexcept { return pending_; }

  /// Records the answer to the pending question and advances one step.
  /// Throws StateError if nothing is pending, InputError if the response
  /// does not name the pending pair.
  void submit(Response answer, const ResampleOptions& options = {});

  /// Asks the oracle until convergence, the question cap, or suspension.
  SortResult run(Oracle& oracle);
  SortResult result() const;

  /// Wall time spent in select_query so far.
  std::chrono::nanoseconds selection_time() const noexcept { return selection_time_; }
  std::uint64_t selections() const noexcept { return selections_; }

 private:
  void advance();

  std::size_t dimension_;
  ErrorModel model_;
  EngineConfig config_;
  MeasurementLog log_;
  Ensemble ensemble_;
  Convergence convergence_;
  EngineStatus status_ = EngineStatus::AwaitingAnswer;
  std::optional<QueryPair> pending_;
  std::vector<TraceEntry> trace_;
  std::chrono::nanoseconds selection_time_{0};
  std::uint64_t selections_ = 0;
};

/// Runs a fresh session against `oracle`. L = 1 returns at once.
SortResult run(std::size_t dimension, Oracle& oracle, const ErrorModel& model, const EngineConfig& config);

/// Upper-bound cost alpha L ln L + beta N L^3 ln L of a full sort.
double estimated_cost(double dimension, double ensemble_size, double alpha, double beta);

/// True when human judgements dominate the cost: L^2 < alpha / (beta N).
bool human_cost_dominates(double dimension, double ensemble_size, double alpha, double beta);

}  // namespace noisyrank
