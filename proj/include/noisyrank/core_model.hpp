#pragma once

// Orderings, judgement logs, the two error models and posterior weights.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace noisyrank {

/// Dense element index in [0, L).
using ElementId = std::uint32_t;

bool is_permutation_of_range(std::span<const ElementId> perm);

/// A permutation of the L elements, lowest (least preferred) first.
class Ordering {
 public:
  Ordering() = default;
  /// Throws InputError unless `perm` is a permutation of [0, perm.size()).
  explicit Ordering(std::vector<ElementId> perm);

  static Ordering identity(std::size_t size);

  std::size_t size() const noexcept { return perm_.size(); }
  ElementId operator[](std::size_t position) const { return perm_[position]; }
  std::span<const ElementId> elements() const noexcept { return perm_; }
  auto begin() const noexcept { return perm_.begin(); }
  auto end() const noexcept { return perm_.end(); }

  /// positions()[e] is the index of element e.
  std::vector<std::uint32_t> positions() const;
  Ordering reversed() const;
  bool precedes(ElementId a, ElementId b) const;

  /// Canonical byte encoding, used for exact-equality hashing.
  std::string key() const;

  auto operator<=>(const Ordering&) const = default;

 private:
  std::vector<ElementId> perm_;
};

/// One judgement "lesser < greater".
struct Measurement {
  ElementId lesser = 0;
  ElementId greater = 0;
  std::uint64_t sequence_number = 0;

  bool operator==(const Measurement&) const = default;
};

/// Append-only judgement history plus the dense L x L count matrix, where
/// count(i, j) is the number of records asserting i < j. For every element it
/// also keeps the distinct elements it has lost to and the distinct elements
/// it has beaten, which the max-element sampler uses to update dispute
/// counters in time proportional to an element's degree.
class MeasurementLog {
 public:
  explicit MeasurementLog(std::size_t dimension = 0);

  /// Rebuilds a log from records; sequence numbers must run 1, 2, 3, ...
  static MeasurementLog from_records(std::size_t dimension, std::span<const Measurement> records);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  std::span<const Measurement> records() const noexcept { return records_; }
  const Measurement& back() const { return records_.back(); }

  std::uint32_t count(ElementId lesser, ElementId greater) const {
    return counts_[static_cast<std::size_t>(lesser) * dimension_ + greater];
  }

  /// Appends "lesser < greater" with the next sequence number.
  const Measurement& append(ElementId lesser, ElementId greater);

  /// Elements r with count(e, r) > 0.
  std::span<const ElementId> lost_to(ElementId e) const { return lost_to_[e]; }
  /// Elements r with count(r, e) > 0.
  std::span<const ElementId> beaten(ElementId e) const { return beaten_[e]; }

  /// Count matrix recomputed from the records alone.
  std::vector<std::uint32_t> recount() const;
  bool counts_consistent() const { return recount() == counts_; }
  std::span<const std::uint32_t> counts() const noexcept { return counts_; }

 private:
  std::size_t dimension_;
  std::vector<Measurement> records_;
  std::vector<std::uint32_t> counts_;
  std::vector<std::vector<ElementId>> lost_to_;
  std::vector<std::vector<ElementId>> beaten_;
};

/// Value-returning append. Throws InputError on identical or out-of-range ids.
MeasurementLog record_measurement(const MeasurementLog& log, ElementId lesser, ElementId greater);

/// Per-sample counters for the unknown-p model.
struct SampleBookkeeping {
  std::uint64_t n_seen = 0;
  std::uint64_t n_match = 0;

  bool operator==(const SampleBookkeeping&) const = default;
};

/// Either a known channel reliability p or the unknown-p model with a flat
/// prior integrated out.
class ErrorModel {
 public:
  /// Throws ValidationError unless 0.5 < p <= 1.
  static ErrorModel known(double p);
  /// Allows the uninformative boundary p = 0.5; for tests and oracles only.
  static ErrorModel known_unchecked(double p);
  static ErrorModel unknown() noexcept { return ErrorModel(false, 0.0); }

  bool is_known() const noexcept { return known_; }
  /// Only meaningful when is_known().
  double p() const noexcept { return p_; }

  bool operator==(const ErrorModel&) const = default;

 private:
  ErrorModel(bool known, double p) noexcept : known_(known), p_(p) {}

  bool known_;
  double p_;
};

/// Probability that the next judgement matches a sample with bookkeeping `bk`.
double f_next(const ErrorModel& model, const SampleBookkeeping& bk) noexcept;

/// (1 - f) / f; the relative weight of a disputed versus a matching record.
inline double dispute_ratio(double f) noexcept { return (1.0 - f) / f; }

/// Number of records whose lesser element precedes the greater one in `order`.
std::uint64_t n_match(const Ordering& order, const MeasurementLog& log);

/// Number of times `e` was judged smaller than another member of `remaining`.
std::uint64_t n_dispute(ElementId e, std::span<const ElementId> remaining, const MeasurementLog& log);

/// Unnormalized log posterior weight of `order`. Returns -infinity when p = 1
/// and the order contradicts a record.
double posterior_weight(const Ordering& order, const MeasurementLog& log, const ErrorModel& model);

/// Same weight from precomputed counts.
double posterior_log_weight(std::uint64_t n, std::uint64_t matches, const ErrorModel& model) noexcept;

inline constexpr std::size_t kBruteForceMaxSize = 8;

/// Exact posterior over all L! orderings. Refuses L > kBruteForceMaxSize.
std::map<Ordering, double> brute_force_posterior(const MeasurementLog& log, const ErrorModel& model);

}  // namespace noisyrank
