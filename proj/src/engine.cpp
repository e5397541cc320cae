#include "noisyrank/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "noisyrank/errors.hpp"

namespace noisyrank {

namespace {

// Substream domains, so init / selection / update draws never collide.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSelectStream = 2;
constexpr std::uint64_t kApplyStream = 3;

}  // namespace

const char* to_string(QueryStrategy strategy) noexcept {
  return strategy == QueryStrategy::FullPairs ? "full" : "adjacent";
}

QueryStrategy parse_query_strategy(const std::string& text) {
  if (text == "full") return QueryStrategy::FullPairs;
  if (text == "adjacent") return QueryStrategy::AdjacentPairs;
  throw ValidationError("strategy", "strategy must be 'full' or 'adjacent'; got '" + text + "'");
}

const char* to_string(EngineStatus status) noexcept {
  switch (status) {
    case EngineStatus::AwaitingAnswer:
      return "awaiting_answer";
    case EngineStatus::Converged:
      return "converged";
    case EngineStatus::Exhausted:
      return "exhausted";
  }
  return "unknown";
}

void EngineConfig::validate() const {
  if (ensemble_size < 2) {
    throw ValidationError("N", "ensemble size N must be at least 2");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ValidationError("epsilon", "epsilon must lie in (0, 1)");
  }
  if (max_questions && *max_questions < 1) {
    throw ValidationError("max_questions", "max_questions must be at least 1");
  }
}

std::uint64_t EngineConfig::warm_start_for(std::size_t dimension) const {
  return warm_start_threshold.value_or(dimension);
}

std::uint64_t EngineConfig::max_questions_for(std::size_t dimension) const {
  if (max_questions) return *max_questions;
  const double l = static_cast<double>(dimension);
  const double cap = dimension < 2 ? 1.0 : std::ceil(50.0 * l * std::log(l));
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(cap));
}

// --- Ensemble ---------------------------------------------------------------

Ensemble Ensemble::uniform(std::size_t dimension, std::size_t size, std::uint64_t seed) {
  if (dimension < 2) {
    throw InputError("an ensemble needs L >= 2; got L = " + std::to_string(dimension));
  }
  std::vector<Candidate> candidates;
  candidates.reserve(size);
  std::vector<ElementId> perm(dimension);
  for (std::size_t k = 0; k < size; ++k) {
    std::iota(perm.begin(), perm.end(), ElementId{0});
    auto rng = RandomStream::derive(seed, {kInitStream, k});
    rng.shuffle(std::span<ElementId>(perm));
    candidates.push_back({Ordering(perm), {}});
  }
  return Ensemble(std::move(candidates));
}

Ensemble::Ensemble(std::vector<Candidate> candidates) : candidates_(std::move(candidates)) {
  if (candidates_.empty()) {
    throw InputError("an ensemble needs at least one candidate");
  }
  dimension_ = candidates_.front().order.size();
  for (const auto& c : candidates_) {
    if (c.order.size() != dimension_) {
      throw InputError("ensemble candidates differ in length");
    }
  }
  before_ = PairTable<std::uint32_t>(dimension_, 0);
  adjacent_ = PairTable<std::uint32_t>(dimension_, 0);
  adjacent_slot_ = PairTable<std::int32_t>(dimension_, -1);
  for (const auto& c : candidates_) {
    add_pairs(c.order.elements(), 0, dimension_, +1);
  }
}

void Ensemble::add_adjacent(ElementId a, ElementId b, int sign) {
  auto& count = adjacent_.at(a, b);
  if (sign > 0) {
    if (count++ == 0) {
      adjacent_slot_.at(a, b) = static_cast<std::int32_t>(adjacent_set_.size());
      adjacent_set_.push_back({std::min(a, b), std::max(a, b)});
    }
    return;
  }
  if (--count == 0) {
    auto& slot = adjacent_slot_.at(a, b);
    const QueryPair moved = adjacent_set_.back();
    adjacent_set_[static_cast<std::size_t>(slot)] = moved;
    adjacent_slot_.at(moved.i, moved.j) = slot;
    adjacent_set_.pop_back();
    slot = -1;
  }
}

void Ensemble::add_pairs(std::span<const ElementId> perm, std::size_t begin, std::size_t end, int sign) {
  for (std::size_t x = begin; x < end; ++x) {
    const ElementId a = perm[x];
    for (std::size_t y = x + 1; y < end; ++y) {
      const ElementId b = perm[y];
      if (a < b) {
        before_.at(a, b) += static_cast<std::uint32_t>(sign);
      }
    }
  }
  // Adjacency slots touching [begin, end): slot s joins positions s and s+1.
  const std::size_t first_slot = begin == 0 ? 0 : begin - 1;
  const std::size_t last_slot = std::min(end, perm.size() - 1);
  for (std::size_t s = first_slot; s < last_slot; ++s) {
    add_adjacent(perm[s], perm[s + 1], sign);
  }
}

void Ensemble::replace(std::size_t k, Candidate next, std::size_t begin, std::size_t end) {
  auto& current = candidates_[k];
  if (next.order.size() != dimension_) {
    throw InputError("replacement candidate has the wrong length");
  }
  if (begin < end) {
    add_pairs(current.order.elements(), begin, end, -1);
    add_pairs(next.order.elements(), begin, end, +1);
  }
  current = std::move(next);
}

bool Ensemble::tables_consistent() const {
  Ensemble fresh(candidates_);
  for (ElementId i = 0; i < dimension_; ++i) {
    for (ElementId j = i + 1; j < dimension_; ++j) {
      if (fresh.before_.at(i, j) != before_.at(i, j) || fresh.adjacent_.at(i, j) != adjacent_.at(i, j)) {
        return false;
      }
      if (pair_count(i, j) + pair_count(j, i) != candidates_.size()) {
        return false;
      }
    }
  }
  auto mine = scanned_pairs(*this, QueryStrategy::AdjacentPairs);
  auto theirs = scanned_pairs(fresh, QueryStrategy::AdjacentPairs);
  return mine == theirs;
}

Ensemble init_ensemble(std::size_t dimension, const EngineConfig& config) {
  return Ensemble::uniform(dimension, config.ensemble_size, config.seed);
}

// --- Query selection --------------------------------------------------------

std::vector<QueryPair> scanned_pairs(const Ensemble& ensemble, QueryStrategy strategy) {
  std::vector<QueryPair> pairs;
  if (strategy == QueryStrategy::FullPairs) {
    const auto l = static_cast<ElementId>(ensemble.dimension());
    for (ElementId i = 0; i < l; ++i) {
      for (ElementId j = i + 1; j < l; ++j) pairs.push_back({i, j});
    }
    return pairs;
  }
  const auto adjacent = ensemble.adjacent_pairs();
  pairs.assign(adjacent.begin(), adjacent.end());
  std::sort(pairs.begin(), pairs.end(), [](const QueryPair& a, const QueryPair& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  return pairs;
}

QueryPair select_query(const Ensemble& ensemble, QueryStrategy strategy, RandomStream& rng) {
  const auto n = static_cast<std::int64_t>(ensemble.size());
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  std::vector<QueryPair> ties;

  auto consider = [&](ElementId i, ElementId j) {
    const std::int64_t diff = 2 * static_cast<std::int64_t>(ensemble.pair_count(i, j)) - n;
    const std::int64_t score = diff * diff;
    if (score < best) {
      best = score;
      ties.clear();
    }
    if (score == best) {
      ties.push_back({i, j});
    }
  };

  if (strategy == QueryStrategy::FullPairs) {
    const auto l = static_cast<ElementId>(ensemble.dimension());
    for (ElementId i = 0; i < l; ++i) {
      for (ElementId j = i + 1; j < l; ++j) consider(i, j);
    }
  } else {
    for (const QueryPair& p : ensemble.adjacent_pairs()) consider(p.i, p.j);
    // the set's internal order depends on update history; canonicalize
    std::sort(ties.begin(), ties.end(), [](const QueryPair& a, const QueryPair& b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
  }
  if (ties.empty()) {
    throw InputError("select_query: no pairs to scan");
  }
  return ties.size() == 1 ? ties.front() : ties[rng.uniform_index(ties.size())];
}

// --- Ensemble update --------------------------------------------------------

ApplyStats apply_measurement(Ensemble& ensemble, const Measurement& m, const MeasurementLog& log,
                             const ErrorModel& model, const EngineConfig& config,
                             const ResampleOptions& base_options) {
  ResampleOptions options = base_options;
  options.middle_sampler = log.size() < config.warm_start_for(log.dimension()) ? SamplerKind::RecursivePartition
                                                                                : SamplerKind::MaxElement;
  ApplyStats stats;
  std::size_t middle_total = 0;
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    auto rng = RandomStream::derive(config.seed, {kApplyStream, k, m.sequence_number});
    const Candidate& c = ensemble[k];
    auto r = incremental_resample(c.order, c.bk, m, log, model, rng, options);
    switch (r.outcome) {
      case ResampleOutcome::Consistent:
        ++stats.consistent;
        ensemble.set_bookkeeping(k, r.bk);
        break;
      case ResampleOutcome::KeptInconsistent:
        ++stats.kept_inconsistent;
        ensemble.set_bookkeeping(k, r.bk);
        break;
      case ResampleOutcome::Resampled:
        ++stats.resampled;
        stats.fallbacks += r.fell_back;
        middle_total += r.middle_length();
        ensemble.replace(k, {std::move(r.order), r.bk}, r.middle_begin, r.middle_end);
        break;
    }
  }
  if (stats.resampled > 0) {
    stats.middle_length_mean = static_cast<double>(middle_total) / static_cast<double>(stats.resampled);
  }
  return stats;
}

Convergence check_convergence(const Ensemble& ensemble, double epsilon) {
  struct Tally {
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, Tally> tallies;
  tallies.reserve(ensemble.size());
  std::size_t best_index = 0;
  std::size_t best_count = 0;
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    auto [it, inserted] = tallies.try_emplace(ensemble[k].order.key(), Tally{0, k});
    const std::size_t count = ++it->second.count;
    if (count > best_count || (count == best_count && it->second.first < best_index)) {
      best_count = count;
      best_index = it->second.first;
    }
  }
  Convergence c;
  if (ensemble.size() == 0) return c;
  c.modal_order = ensemble[best_index].order;
  c.modal_fraction = static_cast<double>(best_count) / static_cast<double>(ensemble.size());
  c.converged = c.modal_fraction > 1.0 - epsilon;
  return c;
}

// --- Trace ------------------------------------------------------------------

std::string format_trace_csv(std::span<const TraceEntry> trace) {
  std::string out = "q_index,i,j,response,modal_fraction,middle_partition_len_mean\n";
  char buf[160];
  for (const auto& t : trace) {
    std::snprintf(buf, sizeof buf, "%llu,%u,%u,%u,%.6f,%.6f\n", static_cast<unsigned long long>(t.q_index),
                  t.pair.i, t.pair.j, t.response, t.modal_fraction, t.middle_length_mean);
    out += buf;
  }
  return out;
}

// --- Engine -----------------------------------------------------------------

Engine::Engine(std::size_t dimension, ErrorModel model, EngineConfig config)
    : dimension_(dimension), model_(model), config_(std::move(config)), log_(dimension) {
  config_.validate();
  if (dimension == 0) {
    throw InputError("cannot sort an empty list");
  }
  if (dimension == 1) {
    convergence_ = {true, Ordering::identity(1), 1.0};
    status_ = EngineStatus::Converged;
    return;
  }
  ensemble_ = init_ensemble(dimension, config_);
  advance();
}

Engine Engine::replay(std::size_t dimension, ErrorModel model, EngineConfig config, const MeasurementLog& journal) {
  if (journal.dimension() != dimension) {
    throw ReplayError("journal has L=" + std::to_string(journal.dimension()) + ", session has L=" +
                      std::to_string(dimension));
  }
  Engine engine(dimension, model, std::move(config));
  for (const Measurement& m : journal.records()) {
    if (!engine.pending_) {
      throw ReplayError("journal record #" + std::to_string(m.sequence_number) + " follows a finished session");
    }
    const QueryPair q = *engine.pending_;
    const QueryPair answered{std::min(m.lesser, m.greater), std::max(m.lesser, m.greater)};
    if (!(q == answered)) {
      throw ReplayError("journal record #" + std::to_string(m.sequence_number) + " answers (" +
                        std::to_string(answered.i) + "," + std::to_string(answered.j) + ") but the engine asked (" +
                        std::to_string(q.i) + "," + std::to_string(q.j) + ")");
    }
    engine.submit({m.lesser, m.greater});
  }
  return engine;
}

void Engine::advance() {
  convergence_ = check_convergence(ensemble_, config_.epsilon);
  pending_.reset();
  if (convergence_.converged) {
    status_ = EngineStatus::Converged;
    return;
  }
  if (log_.size() >= config_.max_questions_for(dimension_)) {
    status_ = EngineStatus::Exhausted;
    return;
  }
  status_ = EngineStatus::AwaitingAnswer;
  auto rng = RandomStream::derive(config_.seed, {kSelectStream, log_.size()});
  const auto start = std::chrono::steady_clock::now();
  pending_ = select_query(ensemble_, config_.strategy, rng);
  selection_time_ += std::chrono::steady_clock::now() - start;
  ++selections_;
}

void Engine::submit(Response answer, const ResampleOptions& options) {
  if (!pending_) {
    throw StateError(std::string("no question is pending; session is ") + to_string(status_));
  }
  const QueryPair q = *pending_;
  const bool names_pair = (answer.lesser == q.i && answer.greater == q.j) ||
                          (answer.lesser == q.j && answer.greater == q.i);
  if (!names_pair) {
    throw InputError("answer (" + std::to_string(answer.lesser) + "<" + std::to_string(answer.greater) +
                     ") does not match the pending pair (" + std::to_string(q.i) + "," + std::to_string(q.j) + ")");
  }
  const Measurement m = log_.append(answer.lesser, answer.greater);
  const auto stats = apply_measurement(ensemble_, m, log_, model_, config_, options);
  advance();
  trace_.push_back({m.sequence_number, q, answer.lesser, convergence_.modal_fraction, stats.middle_length_mean});
}

SortResult Engine::run(Oracle& oracle) {
  while (pending_) {
    const QueryPair q = *pending_;
    const auto answer = oracle.ask(q.i, q.j);
    if (!answer) {
      SortResult r = result();
      r.suspended = true;
      return r;
    }
    submit(*answer);
  }
  return result();
}

SortResult Engine::result() const {
  SortResult r;
  r.modal_order = convergence_.modal_order;
  r.modal_fraction = convergence_.modal_fraction;
  r.questions_asked = log_.size();
  r.converged = status_ == EngineStatus::Converged;
  r.status = status_;
  r.trace = trace_;
  return r;
}

SortResult run(std::size_t dimension, Oracle& oracle, const ErrorModel& model, const EngineConfig& config) {
  Engine engine(dimension, model, config);
  return engine.run(oracle);
}

double estimated_cost(double dimension, double ensemble_size, double alpha, double beta) {
  const double l_ln_l = dimension * std::log(dimension);
  return alpha * l_ln_l + beta * ensemble_size * dimension * dimension * l_ln_l;
}

bool human_cost_dominates(double dimension, double ensemble_size, double alpha, double beta) {
  return dimension * dimension < alpha / (beta * ensemble_size);
}

}  // namespace noisyrank
