#include "noisyrank/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "noisyrank/errors.hpp"

namespace noisyrank {

const char* to_string(SamplerKind kind) noexcept {
  switch (kind) {
    case SamplerKind::Naive:
      return "naive";
    case SamplerKind::RecursivePartition:
      return "recursive";
    case SamplerKind::MaxElement:
      return "max-element";
    case SamplerKind::Incremental:
      return "incremental";
  }
  return "unknown";
}

namespace {

// rho^k with the convention 0^0 = 1.
double power_of_ratio(double rho, std::uint64_t k) {
  if (k == 0) return 1.0;
  if (rho == 0.0) return 0.0;
  return std::pow(rho, static_cast<double>(k));
}

// Probability of passing one sequential test, normalized so the more likely
// outcome always passes.
double sequential_pass_probability(double f, bool match) {
  const double ratio = match ? f / (1.0 - f) : (1.0 - f) / f;
  return std::min(1.0, ratio);
}

std::uint64_t find_sequence_number(const MeasurementLog& log, ElementId lesser, ElementId greater) {
  for (const Measurement& m : log.records()) {
    if (m.lesser == lesser && m.greater == greater) return m.sequence_number;
  }
  return 0;
}

[[noreturn]] void throw_contradiction(std::span<const ElementId> remaining, const MeasurementLog& log,
                                      const DisputeTracker& tracker) {
  // Every remaining element lost to another remaining one, so following
  // "lost to" edges must revisit an element.
  std::vector<std::size_t> visit_index(log.dimension(), std::numeric_limits<std::size_t>::max());
  std::vector<ElementId> path;
  ElementId current = remaining.front();
  while (visit_index[current] == std::numeric_limits<std::size_t>::max()) {
    visit_index[current] = path.size();
    path.push_back(current);
    for (ElementId next : log.lost_to(current)) {
      if (tracker.is_remaining(next)) {
        current = next;
        break;
      }
    }
  }
  std::string detail;
  for (std::size_t i = visit_index[current]; i < path.size(); ++i) {
    const ElementId lesser = path[i];
    const ElementId greater = i + 1 < path.size() ? path[i + 1] : current;
    if (!detail.empty()) detail += ", ";
    detail += "#" + std::to_string(find_sequence_number(log, lesser, greater)) + " (" + std::to_string(lesser) +
              "<" + std::to_string(greater) + ")";
  }
  throw InconsistencyError("p = 1 but the journal contains a contradiction cycle: " + detail);
}

class PartitionSampler {
 public:
  PartitionSampler(const MeasurementLog& log, const ErrorModel& model, RandomStream& rng, std::uint64_t budget)
      : log_(log), model_(model), rng_(rng), budget_(budget), side_(log.dimension(), -1) {}

  void sample(std::vector<ElementId> elements, std::vector<const Measurement*> records, SampleBookkeeping& bk,
              std::vector<ElementId>& out) {
    if (elements.size() == 1) {
      out.push_back(elements.front());
      return;
    }
    const std::size_t lower_size = elements.size() / 2;
    const double rho = model_.is_known() ? dispute_ratio(model_.p()) : 0.0;

    bool accepted = false;
    for (std::uint64_t attempt = 0; attempt < budget_ && !accepted; ++attempt) {
      rng_.shuffle(std::span<ElementId>(elements));
      for (std::size_t i = 0; i < elements.size(); ++i) {
        side_[elements[i]] = i < lower_size ? 0 : 1;
      }
      if (model_.is_known()) {
        std::uint64_t crossing = 0;
        std::uint64_t disputes = 0;
        for (const Measurement* m : records) {
          if (side_[m->lesser] != side_[m->greater]) {
            ++crossing;
            disputes += side_[m->lesser] == 1;
          }
        }
        if (rng_.uniform() < power_of_ratio(rho, disputes)) {
          accepted = true;
          bk.n_seen += crossing;
          bk.n_match += crossing - disputes;
        }
      } else {
        SampleBookkeeping trial = bk;
        accepted = true;
        for (const Measurement* m : records) {
          if (side_[m->lesser] == side_[m->greater]) continue;
          const bool match = side_[m->lesser] == 0;
          if (!(rng_.uniform() < sequential_pass_probability(f_next(model_, trial), match))) {
            accepted = false;
            break;
          }
          ++trial.n_seen;
          trial.n_match += match;
        }
        if (accepted) bk = trial;
      }
    }
    if (!accepted) {
      for (ElementId e : elements) side_[e] = -1;
      throw BudgetError("recursive partition sampler rejected " + std::to_string(budget_) +
                        " splits of a " + std::to_string(elements.size()) + "-element set");
    }

    std::vector<ElementId> lower(elements.begin(), elements.begin() + static_cast<std::ptrdiff_t>(lower_size));
    std::vector<ElementId> upper(elements.begin() + static_cast<std::ptrdiff_t>(lower_size), elements.end());
    std::vector<const Measurement*> lower_records;
    std::vector<const Measurement*> upper_records;
    for (const Measurement* m : records) {
      if (side_[m->lesser] == side_[m->greater]) {
        (side_[m->lesser] == 0 ? lower_records : upper_records).push_back(m);
      }
    }
    for (ElementId e : elements) side_[e] = -1;
    sample(std::move(lower), std::move(lower_records), bk, out);
    sample(std::move(upper), std::move(upper_records), bk, out);
  }

 private:
  const MeasurementLog& log_;
  const ErrorModel& model_;
  RandomStream& rng_;
  std::uint64_t budget_;
  std::vector<int> side_;
};

}  // namespace

NaiveSample naive_rejection_sample(const MeasurementLog& log, const ErrorModel& model, RandomStream& rng,
                                   std::uint64_t budget) {
  const std::size_t size = log.dimension();
  if (size > kNaiveMaxSize) {
    throw InputError("naive rejection sampler refused for L = " + std::to_string(size) + " (limit " +
                     std::to_string(kNaiveMaxSize) + ")");
  }
  std::vector<ElementId> perm(size);
  std::iota(perm.begin(), perm.end(), ElementId{0});
  std::vector<std::uint32_t> pos(size);
  const std::uint64_t n = log.size();
  const double rho = model.is_known() ? dispute_ratio(model.p()) : 0.0;

  for (std::uint64_t attempt = 1; attempt <= budget; ++attempt) {
    rng.shuffle(std::span<ElementId>(perm));
    for (std::size_t i = 0; i < size; ++i) pos[perm[i]] = static_cast<std::uint32_t>(i);

    if (model.is_known()) {
      std::uint64_t matches = 0;
      for (const Measurement& m : log.records()) matches += pos[m.lesser] < pos[m.greater];
      if (rng.uniform() < power_of_ratio(rho, n - matches)) {
        return {Ordering(perm), {n, matches}, attempt};
      }
      continue;
    }

    SampleBookkeeping bk;
    bool accepted = true;
    for (const Measurement& m : log.records()) {
      const bool match = pos[m.lesser] < pos[m.greater];
      const double f = f_next(model, bk);
      if (!(rng.uniform() < (match ? f : 1.0 - f))) {
        accepted = false;
        break;
      }
      ++bk.n_seen;
      bk.n_match += match;
    }
    if (accepted) {
      return {Ordering(perm), bk, attempt};
    }
  }
  throw BudgetError("naive rejection sampler exceeded " + std::to_string(budget) + " attempts");
}

SubSample recursive_partition_sample(std::span<const ElementId> elements, const MeasurementLog& log,
                                     const ErrorModel& model, RandomStream& rng, SampleBookkeeping bk,
                                     std::uint64_t budget_per_level) {
  if (elements.empty()) {
    throw InputError("recursive partition sampler needs a non-empty element set");
  }
  std::vector<char> member(log.dimension(), 0);
  for (ElementId e : elements) {
    if (e >= log.dimension()) throw InputError("element id out of range");
    member[e] = 1;
  }
  std::vector<const Measurement*> records;
  for (const Measurement& m : log.records()) {
    if (member[m.lesser] && member[m.greater]) records.push_back(&m);
  }
  SubSample result;
  result.order.reserve(elements.size());
  PartitionSampler sampler(log, model, rng, budget_per_level);
  sampler.sample(std::vector<ElementId>(elements.begin(), elements.end()), std::move(records), bk, result.order);
  result.bk = bk;
  return result;
}

DisputeTracker::DisputeTracker(std::span<const ElementId> elements, const MeasurementLog& log)
    : log_(&log), disputes_(log.dimension(), 0), state_(log.dimension(), kAbsent) {
  for (ElementId e : elements) {
    if (e >= log.dimension()) throw InputError("element id out of range");
    if (state_[e] == kAbsent) ++remaining_;
    state_[e] = kRemaining;
  }
  for (ElementId e : elements) {
    std::uint64_t d = 0;
    for (ElementId r : log.lost_to(e)) {
      if (state_[r] == kRemaining) d += log.count(e, r);
    }
    disputes_[e] = d;
  }
}

DisputeTracker::Removal DisputeTracker::remove(ElementId e) {
  if (state_[e] != kRemaining) {
    throw InputError("element " + std::to_string(e) + " is not remaining");
  }
  Removal removal;
  removal.disputed = disputes_[e];
  for (ElementId x : log_->beaten(e)) {
    if (state_[x] == kRemaining) {
      const auto c = log_->count(x, e);
      disputes_[x] -= c;
      removal.consistent += c;
    }
  }
  state_[e] = kRemoved;
  disputes_[e] = 0;
  --remaining_;
  return removal;
}

SubSample max_element_sample(std::span<const ElementId> elements, const MeasurementLog& log, const ErrorModel& model,
                             RandomStream& rng, SampleBookkeeping bk, const SelectionObserver& observer) {
  if (elements.empty()) {
    throw InputError("max-element sampler needs a non-empty element sequence");
  }
  std::vector<ElementId> sequence(elements.begin(), elements.end());
  DisputeTracker tracker(sequence, log);
  SubSample result;
  result.order.assign(sequence.size(), 0);
  std::size_t slot = sequence.size();

  std::vector<double> beta;
  std::vector<double> probabilities;
  while (sequence.size() > 1) {
    const std::size_t k = sequence.size();
    const double rho = dispute_ratio(f_next(model, bk));
    beta.assign(k, 0.0);

    if (rho == 0.0) {
      for (std::size_t i = 0; i < k; ++i) beta[i] = tracker.disputes(sequence[i]) == 0 ? 1.0 : 0.0;
    } else {
      // Work relative to the most likely element so no weight underflows.
      const double log_rho = std::log(rho);
      double max_log = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < k; ++i) {
        beta[i] = static_cast<double>(tracker.disputes(sequence[i])) * log_rho;
        max_log = std::max(max_log, beta[i]);
      }
      for (std::size_t i = 0; i < k; ++i) beta[i] = std::exp(beta[i] - max_log);
    }

    double z = 0.0;
    for (std::size_t i = k; i-- > 0;) z += beta[i];
    if (z == 0.0) {
      throw_contradiction(sequence, log, tracker);
    }

    if (observer) {
      probabilities.resize(k);
      for (std::size_t i = 0; i < k; ++i) probabilities[i] = beta[i] / z;
      observer(sequence, probabilities, tracker);
    }

    const double sigma = rng.uniform();
    std::size_t chosen = k;
    double w = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double gamma = beta[i] / z;
      if (sigma < w + gamma) {
        chosen = i;
        break;
      }
      w += gamma;
    }
    if (chosen == k) {
      // sigma landed in the rounding slack above the last cumulative sum
      chosen = k - 1;
      while (beta[chosen] == 0.0) --chosen;
    }

    const ElementId e = sequence[chosen];
    const auto removal = tracker.remove(e);
    bk.n_seen += removal.consistent + removal.disputed;
    bk.n_match += removal.consistent;
    result.order[--slot] = e;
    sequence.erase(sequence.begin() + static_cast<std::ptrdiff_t>(chosen));
  }
  result.order[--slot] = sequence.front();
  result.bk = bk;
  return result;
}

ResampleResult incremental_resample(const Ordering& candidate, const SampleBookkeeping& bk, const Measurement& m,
                                    const MeasurementLog& log, const ErrorModel& model, RandomStream& rng,
                                    const ResampleOptions& options) {
  if (log.empty() || log.back().lesser != m.lesser || log.back().greater != m.greater) {
    throw InputError("incremental_resample: the log must end with the new measurement");
  }
  if (candidate.size() != log.dimension()) {
    throw InputError("incremental_resample: candidate size does not match log dimension");
  }
  std::size_t pos_lesser = candidate.size();
  std::size_t pos_greater = candidate.size();
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (candidate[i] == m.lesser) pos_lesser = i;
    if (candidate[i] == m.greater) pos_greater = i;
  }

  ResampleResult result;
  if (pos_lesser < pos_greater) {
    result.order = candidate;
    result.bk = {bk.n_seen + 1, bk.n_match + 1};
    result.outcome = ResampleOutcome::Consistent;
    return result;
  }

  const double f = f_next(model, bk);
  const double keep = std::min(1.0, options.keep_ratio ? options.keep_ratio(f) : dispute_ratio(f));
  if (rng.uniform() < keep) {
    result.order = candidate;
    result.bk = {bk.n_seen + 1, bk.n_match};
    result.outcome = ResampleOutcome::KeptInconsistent;
    return result;
  }

  // Candidate is {front..., greater ... lesser, ...back}; only the middle
  // stretch contradicts the new record. Reversed, it runs from most to least
  // likely maximum, which is the order the max-element walk wants.
  const auto first = candidate.begin() + static_cast<std::ptrdiff_t>(pos_greater);
  const auto last = candidate.begin() + static_cast<std::ptrdiff_t>(pos_lesser) + 1;
  std::vector<ElementId> middle(first, last);
  std::reverse(middle.begin(), middle.end());

  SubSample fresh;
  switch (options.middle_sampler) {
    case SamplerKind::MaxElement:
      fresh = max_element_sample(middle, log, model, rng, {});
      break;
    case SamplerKind::RecursivePartition:
      try {
        fresh = recursive_partition_sample(middle, log, model, rng, {}, options.partition_budget);
      } catch (const BudgetError&) {
        fresh = max_element_sample(middle, log, model, rng, {});
        result.fell_back = true;
      }
      break;
    default:
      throw InputError(std::string("incremental_resample cannot use the ") + to_string(options.middle_sampler) +
                       " sampler for the middle stretch");
  }

  std::vector<ElementId> spliced(candidate.begin(), candidate.end());
  std::copy(fresh.order.begin(), fresh.order.end(), spliced.begin() + static_cast<std::ptrdiff_t>(pos_greater));
  result.order = Ordering(std::move(spliced));
  result.bk = {log.size(), n_match(result.order, log)};
  result.outcome = ResampleOutcome::Resampled;
  result.middle_begin = pos_greater;
  result.middle_end = pos_lesser + 1;
  return result;
}

}  // namespace noisyrank
