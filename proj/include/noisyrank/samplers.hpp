#pragma once

// Samplers over orderings given a judgement log.
//
// Naive rejection is exact but costs O(L!) draws in the worst case. The
// recursive-partition and max-element samplers build a sample from a series
// of accepted partitions; both normalize locally at each step, so their
// output is close to but not exactly the posterior (see bench's
// sampler_quality_report for the measured gap). incremental_resample updates
// one ensemble member after a new judgement, resampling only the stretch
// between the two compared elements.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "noisyrank/core_model.hpp"
#include "noisyrank/random.hpp"

namespace noisyrank {

enum class SamplerKind { Naive, RecursivePartition, MaxElement, Incremental };

const char* to_string(SamplerKind kind) noexcept;

inline constexpr std::uint64_t kNaiveAttemptBudget = 10'000'000;
inline constexpr std::uint64_t kPartitionAttemptBudget = 1'000'000;
inline constexpr std::size_t kNaiveMaxSize = 10;

struct NaiveSample {
  Ordering order;
  SampleBookkeeping bk;
  std::uint64_t attempts = 0;
};

/// A sampled arrangement of a subset of the elements, lowest first.
struct SubSample {
  std::vector<ElementId> order;
  SampleBookkeeping bk;
};

/// Uniform proposal plus rejection. For a known p the proposal is accepted
/// with probability r^(n - n_match), r = (1-p)/p. For unknown p the records
/// are replayed in journal order as tests passed with probability f_n or
/// 1 - f_n, which accepts each ordering with probability proportional to its
/// unknown-p posterior weight. Throws InputError for L > kNaiveMaxSize and
/// BudgetError when `budget` proposals are all rejected.
NaiveSample naive_rejection_sample(const MeasurementLog& log, const ErrorModel& model, RandomStream& rng,
                                   std::uint64_t budget = kNaiveAttemptBudget);

/// Splits `elements` into a lower half of floor(k/2) and an upper half of
/// ceil(k/2), accepts the split with probability rho^(disputes), then
/// recurses. Unknown p consumes the cross-partition records as sequential
/// tests. Throws BudgetError if one level rejects `budget_per_level` splits.
SubSample recursive_partition_sample(std::span<const ElementId> elements, const MeasurementLog& log,
                                     const ErrorModel& model, RandomStream& rng, SampleBookkeeping bk,
                                     std::uint64_t budget_per_level = kPartitionAttemptBudget);

/// Running n_dispute counters over a shrinking set. Removing the current
/// maximum walks only the elements it has beaten, so each removal costs the
/// removed element's degree in the judgement graph.
class DisputeTracker {
 public:
  DisputeTracker(std::span<const ElementId> elements, const MeasurementLog& log);

  std::uint64_t disputes(ElementId e) const { return disputes_[e]; }
  bool is_remaining(ElementId e) const { return state_[e] == kRemaining; }
  std::size_t remaining_count() const noexcept { return remaining_; }

  struct Removal {
    std::uint64_t consistent = 0;  // records placing the removed element above a remaining one
    std::uint64_t disputed = 0;    // records placing it below a remaining one
  };

  /// Places `e` above every other remaining element.
  Removal remove(ElementId e);

 private:
  static constexpr char kAbsent = 0;
  static constexpr char kRemaining = 1;
  static constexpr char kRemoved = 2;

  const MeasurementLog* log_;
  std::vector<std::uint64_t> disputes_;
  std::vector<char> state_;
  std::size_t remaining_ = 0;
};

/// Called once per selection with the remaining sequence (in walk order),
/// the selection probabilities beta_i / Z_p, and the tracker state before
/// the chosen element is removed.
using SelectionObserver = std::function<void(std::span<const ElementId> remaining,
                                             std::span<const double> probabilities, const DisputeTracker& tracker)>;

/// Repeatedly picks the maximum of the remaining elements with probability
/// beta_i / Z_p, beta_i = rho^(n_dispute), using a single uniform draw per
/// pick walked over the cumulative weights. `elements` should be presented
/// roughly from most to least likely maximum; Z_p is summed in reverse.
/// Throws InconsistencyError when p = 1 and the remaining elements form a
/// contradiction cycle.
SubSample max_element_sample(std::span<const ElementId> elements, const MeasurementLog& log, const ErrorModel& model,
                             RandomStream& rng, SampleBookkeeping bk, const SelectionObserver& observer = {});

struct ResampleOptions {
  /// Sampler for the middle stretch: MaxElement or RecursivePartition.
  SamplerKind middle_sampler = SamplerKind::MaxElement;
  std::uint64_t partition_budget = kPartitionAttemptBudget;
  /// Replaces the survival probability (1-f)/f of an inconsistent candidate.
  /// Only used to plant faults in tests.
  std::function<double(double f)> keep_ratio;
};

enum class ResampleOutcome { Consistent, KeptInconsistent, Resampled };

struct ResampleResult {
  Ordering order;
  SampleBookkeeping bk;
  ResampleOutcome outcome = ResampleOutcome::Consistent;
  /// Resampled positions [middle_begin, middle_end); empty unless Resampled.
  std::size_t middle_begin = 0;
  std::size_t middle_end = 0;
  /// The recursive sampler exhausted its budget and max-element was used.
  bool fell_back = false;

  std::size_t middle_length() const noexcept { return middle_end - middle_begin; }
};

/// Updates a sample of the posterior before `m` into one after it. `log`
/// must already end with `m`.
ResampleResult incremental_resample(const Ordering& candidate, const SampleBookkeeping& bk, const Measurement& m,
                                    const MeasurementLog& log, const ErrorModel& model, RandomStream& rng,
                                    const ResampleOptions& options = {});

}  // namespace noisyrank
