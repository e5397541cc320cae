#include "noisyrank/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "noisyrank/errors.hpp"

namespace noisyrank {

bool is_permutation_of_range(std::span<const ElementId> perm) {
  std::vector<char> seen(perm.size(), 0);
  for (ElementId e : perm) {
    if (e >= perm.size() || seen[e]) {
      return false;
    }
    seen[e] = 1;
  }
  return true;
}

Ordering::Ordering(std::vector<ElementId> perm) : perm_(std::move(perm)) {
  if (!is_permutation_of_range(perm_)) {
    throw InputError("ordering is not a permutation of [0, " + std::to_string(perm_.size()) + ")");
  }
}

Ordering Ordering::identity(std::size_t size) {
  std::vector<ElementId> perm(size);
  std::iota(perm.begin(), perm.end(), ElementId{0});
  return Ordering(std::move(perm));
}

std::vector<std::uint32_t> Ordering::positions() const {
  std::vector<std::uint32_t> pos(perm_.size());
  for (std::size_t i = 0; i < perm_.size(); ++i) {
    pos[perm_[i]] = static_cast<std::uint32_t>(i);
  }
  return pos;
}

Ordering Ordering::reversed() const {
  Ordering out = *this;
  std::reverse(out.perm_.begin(), out.perm_.end());
  return out;
}

bool Ordering::precedes(ElementId a, ElementId b) const {
  for (ElementId e : perm_) {
    if (e == a) return true;
    if (e == b) return false;
  }
  throw InputError("element not in ordering");
}

std::string Ordering::key() const {
  std::string bytes(perm_.size() * sizeof(ElementId), '\0');
  for (std::size_t i = 0; i < perm_.size(); ++i) {
    const ElementId e = perm_[i];
    for (std::size_t b = 0; b < sizeof(ElementId); ++b) {
      bytes[i * sizeof(ElementId) + b] = static_cast<char>((e >> (8 * b)) & 0xff);
    }
  }
  return bytes;
}

MeasurementLog::MeasurementLog(std::size_t dimension)
    : dimension_(dimension),
      counts_(dimension * dimension, 0),
      lost_to_(dimension),
      beaten_(dimension) {}

MeasurementLog MeasurementLog::from_records(std::size_t dimension, std::span<const Measurement> records) {
  MeasurementLog log(dimension);
  for (const Measurement& m : records) {
    if (m.sequence_number != log.size() + 1) {
      throw InputError("journal sequence gap at record " + std::to_string(log.size() + 1) + " (found " +
                       std::to_string(m.sequence_number) + ")");
    }
    log.append(m.lesser, m.greater);
  }
  return log;
}

const Measurement& MeasurementLog::append(ElementId lesser, ElementId greater) {
  if (lesser >= dimension_ || greater >= dimension_) {
    throw InputError("element id out of range [0, " + std::to_string(dimension_) + ")");
  }
  if (lesser == greater) {
    throw InputError("a measurement must compare two distinct elements");
  }
  auto& cell = counts_[static_cast<std::size_t>(lesser) * dimension_ + greater];
  if (cell == 0) {
    lost_to_[lesser].push_back(greater);
    beaten_[greater].push_back(lesser);
  }
  ++cell;
  records_.push_back({lesser, greater, records_.size() + 1});
  return records_.back();
}

std::vector<std::uint32_t> MeasurementLog::recount() const {
  std::vector<std::uint32_t> counts(dimension_ * dimension_, 0);
  for (const Measurement& m : records_) {
    ++counts[static_cast<std::size_t>(m.lesser) * dimension_ + m.greater];
  }
  return counts;
}

MeasurementLog record_measurement(const MeasurementLog& log, ElementId lesser, ElementId greater) {
  MeasurementLog out = log;
  out.append(lesser, greater);
  return out;
}

ErrorModel ErrorModel::known(double p) {
  if (!(p > 0.5 && p <= 1.0)) {
    throw ValidationError("p", "p must lie in (0.5, 1]; got " + std::to_string(p));
  }
  return ErrorModel(true, p);
}

ErrorModel ErrorModel::known_unchecked(double p) {
  if (!(p >= 0.5 && p <= 1.0)) {
    throw ValidationError("p", "p must lie in [0.5, 1]; got " + std::to_string(p));
  }
  return ErrorModel(true, p);
}

double f_next(const ErrorModel& model, const SampleBookkeeping& bk) noexcept {
  if (model.is_known()) {
    return model.p();
  }
  return (2.0 + static_cast<double>(bk.n_match)) / (4.0 + static_cast<double>(bk.n_seen));
}

std::uint64_t n_match(const Ordering& order, const MeasurementLog& log) {
  if (order.size() != log.dimension()) {
    throw InputError("ordering size " + std::to_string(order.size()) + " does not match log dimension " +
                     std::to_string(log.dimension()));
  }
  const auto pos = order.positions();
  std::uint64_t matches = 0;
  for (const Measurement& m : log.records()) {
    matches += pos[m.lesser] < pos[m.greater];
  }
  return matches;
}

std::uint64_t n_dispute(ElementId e, std::span<const ElementId> remaining, const MeasurementLog& log) {
  if (std::find(remaining.begin(), remaining.end(), e) == remaining.end()) {
    throw InputError("element " + std::to_string(e) + " is not in the remaining set");
  }
  std::uint64_t disputes = 0;
  for (ElementId r : remaining) {
    if (r != e) {
      disputes += log.count(e, r);
    }
  }
  return disputes;
}

double posterior_log_weight(std::uint64_t n, std::uint64_t matches, const ErrorModel& model) noexcept {
  const auto mismatches = static_cast<double>(n - matches);
  const auto m = static_cast<double>(matches);
  if (model.is_known()) {
    const double p = model.p();
    if (p == 1.0) {
      return mismatches == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    }
    return m * std::log(p) + mismatches * std::log1p(-p);
  }
  // ln((1+m)!) + ln((1+n-m)!)
  return std::lgamma(m + 2.0) + std::lgamma(mismatches + 2.0);
}

double posterior_weight(const Ordering& order, const MeasurementLog& log, const ErrorModel& model) {
  return posterior_log_weight(log.size(), n_match(order, log), model);
}

std::map<Ordering, double> brute_force_posterior(const MeasurementLog& log, const ErrorModel& model) {
  const std::size_t size = log.dimension();
  if (size > kBruteForceMaxSize) {
    throw InputError("brute-force posterior refused for L = " + std::to_string(size) + " (limit " +
                     std::to_string(kBruteForceMaxSize) + ")");
  }
  std::vector<ElementId> perm(size);
  std::iota(perm.begin(), perm.end(), ElementId{0});

  std::vector<std::pair<Ordering, double>> weights;
  double max_weight = -std::numeric_limits<double>::infinity();
  do {
    Ordering order(perm);
    const double w = posterior_weight(order, log, model);
    max_weight = std::max(max_weight, w);
    weights.emplace_back(std::move(order), w);
  } while (std::next_permutation(perm.begin(), perm.end()));

  if (!std::isfinite(max_weight)) {
    throw InconsistencyError("every ordering contradicts the journal under p = 1");
  }
  double total = 0.0;
  for (auto& [order, w] : weights) {
    w = std::exp(w - max_weight);
    total += w;
  }
  std::map<Ordering, double> posterior;
  for (auto& [order, w] : weights) {
    posterior.emplace(std::move(order), w / total);
  }
  return posterior;
}

}  // namespace noisyrank
