#include "noisyrank/bench.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <thread>

#include "noisyrank/errors.hpp"
#include "noisyrank/oracles.hpp"

namespace noisyrank::bench {

const char* to_string(ErrorModelMode mode) noexcept { return mode == ErrorModelMode::Known ? "known" : "unknown"; }

void SweepConfig::validate() const {
  if (L_values.empty()) throw ValidationError("L_values", "at least one L is required");
  for (auto l : L_values) {
    if (l < 2) throw ValidationError("L_values", "every L must be at least 2");
  }
  if (p_values.empty()) throw ValidationError("p_values", "at least one p is required");
  for (double p : p_values) {
    if (!(p > 0.5 && p <= 1.0)) throw ValidationError("p_values", "every p must lie in (0.5, 1]");
  }
  if (N_values.empty()) throw ValidationError("N_values", "at least one N is required");
  for (auto n : N_values) {
    if (n < 2) throw ValidationError("N_values", "every N must be at least 2");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon", "epsilon must lie in (0, 1)");
  if (trials_per_cell < 1) throw ValidationError("trials_per_cell", "trials_per_cell must be at least 1");
  if (strategies.empty()) throw ValidationError("query_strategy", "at least one strategy is required");
  if (jobs < 1) throw ValidationError("jobs", "jobs must be at least 1");
}

SweepConfig SweepConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known_keys{"L_values",         "p_values",        "N_values", "epsilon",
                                                "trials_per_cell",  "query_strategy",  "seed",     "jobs",
                                                "error_model_mode", "max_questions"};
  if (!j.is_object()) throw ValidationError("sweep", "sweep config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known_keys.count(key)) throw ValidationError(key, "unknown sweep config key '" + key + "'");
  }
  SweepConfig c;
  try {
    if (j.contains("L_values")) c.L_values = j.at("L_values").get<std::vector<std::size_t>>();
    if (j.contains("p_values")) c.p_values = j.at("p_values").get<std::vector<double>>();
    if (j.contains("N_values")) c.N_values = j.at("N_values").get<std::vector<std::size_t>>();
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("trials_per_cell")) c.trials_per_cell = j.at("trials_per_cell").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<std::size_t>();
    if (j.contains("max_questions")) c.max_questions = j.at("max_questions").get<std::uint64_t>();
    if (j.contains("query_strategy")) {
      const auto& s = j.at("query_strategy");
      c.strategies.clear();
      if (s.is_array()) {
        for (const auto& item : s) c.strategies.push_back(parse_query_strategy(item.get<std::string>()));
      } else {
        c.strategies.push_back(parse_query_strategy(s.get<std::string>()));
      }
    }
    if (j.contains("error_model_mode")) {
      const auto mode = j.at("error_model_mode").get<std::string>();
      if (mode == "known") {
        c.error_model_mode = ErrorModelMode::Known;
      } else if (mode == "unknown") {
        c.error_model_mode = ErrorModelMode::Unknown;
      } else {
        throw ValidationError("error_model_mode", "error_model_mode must be 'known' or 'unknown'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("sweep", std::string("malformed sweep config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json SweepConfig::to_json() const {
  nlohmann::json j;
  j["L_values"] = L_values;
  j["p_values"] = p_values;
  j["N_values"] = N_values;
  j["epsilon"] = epsilon;
  j["trials_per_cell"] = trials_per_cell;
  auto strategies_json = nlohmann::json::array();
  for (auto s : strategies) strategies_json.push_back(to_string(s));
  j["query_strategy"] = strategies_json;
  j["error_model_mode"] = to_string(error_model_mode);
  j["seed"] = seed;
  j["jobs"] = jobs;
  if (max_questions) j["max_questions"] = *max_questions;
  return j;
}

TrialOutcome run_trial(const TrialSpec& spec, std::uint64_t seed) {
  TrialOutcome out;
  const auto start = std::chrono::steady_clock::now();
  try {
    std::vector<ElementId> perm(spec.L);
    std::iota(perm.begin(), perm.end(), ElementId{0});
    auto truth_rng = RandomStream::derive(seed, {0});
    truth_rng.shuffle(std::span<ElementId>(perm));
    const Ordering truth(perm);

    SimulatedOracle oracle(truth, spec.p, RandomStream::derive(seed, {1}));
    EngineConfig config;
    config.ensemble_size = spec.N;
    config.epsilon = spec.epsilon;
    config.strategy = spec.strategy;
    config.max_questions = spec.max_questions;
    config.seed = RandomStream::derive(seed, {2}).next_u64();
    const auto model = spec.mode == ErrorModelMode::Known ? ErrorModel::known(spec.p) : ErrorModel::unknown();

    Engine engine(spec.L, model, config);
    const auto result = engine.run(oracle);
    out.questions = result.questions_asked;
    out.converged = result.converged;
    out.failed = !result.converged || result.modal_order != truth;

    double middle_sum = 0.0;
    std::size_t middle_count = 0;
    for (const auto& t : result.trace) {
      if (t.middle_length_mean > 0.0) {
        middle_sum += t.middle_length_mean;
        ++middle_count;
      }
    }
    out.middle_partition_len = middle_count ? middle_sum / static_cast<double>(middle_count) : 0.0;
    if (engine.selections() > 0) {
      out.selection_micros = std::chrono::duration<double, std::micro>(engine.selection_time()).count() /
                             static_cast<double>(engine.selections());
    }
  } catch (const std::exception& e) {
    out.error = e.what();
    out.failed = true;
  }
  out.wall_millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<SweepRow> run_sweep(const SweepConfig& config) {
  config.validate();
  struct Cell {
    TrialSpec spec;
  };
  std::vector<Cell> cells;
  for (auto l : config.L_values) {
    for (double p : config.p_values) {
      for (auto n : config.N_values) {
        for (auto s : config.strategies) {
          cells.push_back({{l, p, n, config.epsilon, s, config.error_model_mode, config.max_questions}});
        }
      }
    }
  }
  const std::size_t trials = config.trials_per_cell;
  std::vector<TrialOutcome> outcomes(cells.size() * trials);

  // Trial seeds depend on the cell's values, not its index, so a cell
  // reproduces across differently shaped grids.
  auto trial_seed = [&](const TrialSpec& s, std::size_t trial) {
    return RandomStream::derive(config.seed, {s.L, std::bit_cast<std::uint64_t>(s.p), s.N,
                                              std::bit_cast<std::uint64_t>(s.epsilon),
                                              static_cast<std::uint64_t>(s.strategy),
                                              static_cast<std::uint64_t>(s.mode), trial})
        .next_u64();
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t task = next++; task < outcomes.size(); task = next++) {
      const auto& spec = cells[task / trials].spec;
      outcomes[task] = run_trial(spec, trial_seed(spec, task % trials));
    }
  };
  const std::size_t jobs = std::min(config.jobs, outcomes.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<SweepRow> rows;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& spec = cells[c].spec;
    SweepRow row;
    row.L = spec.L;
    row.p = spec.p;
    row.N = spec.N;
    row.epsilon = spec.epsilon;
    row.strategy = spec.strategy;
    row.trials = trials;
    double q_sum = 0.0, q_sq = 0.0, wall = 0.0, middle = 0.0, select = 0.0;
    std::size_t failures = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const auto& o = outcomes[c * trials + t];
      const auto q = static_cast<double>(o.questions);
      q_sum += q;
      q_sq += q * q;
      wall += o.wall_millis;
      middle += o.middle_partition_len;
      select += o.selection_micros;
      failures += o.failed;
      row.errors += !o.error.empty();
    }
    const auto n = static_cast<double>(trials);
    row.mean_questions = q_sum / n;
    row.questions_stddev = trials > 1 ? std::sqrt(std::max(0.0, (q_sq - q_sum * q_sum / n) / (n - 1.0))) : 0.0;
    row.failure_rate = static_cast<double>(failures) / n;
    row.mean_wall_millis = wall / n;
    row.mean_middle_partition_len = middle / n;
    row.mean_selection_micros = select / n;
    rows.push_back(row);
  }
  return rows;
}

std::string format_sweep_csv(std::span<const SweepRow> rows, bool include_timing) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%g,%zu,%g,%s,%zu,%.4f,%.4f,%.4f,%.3f,%.4f\n", r.L, r.p, r.N, r.epsilon,
                  to_string(r.strategy), r.trials, r.mean_questions, r.questions_stddev, r.failure_rate,
                  include_timing ? r.mean_wall_millis : 0.0, r.mean_middle_partition_len);
    out += buf;
  }
  return out;
}

ScalingFit fit_scaling(std::span<const SweepRow> rows) {
  std::set<std::size_t> distinct;
  for (const auto& r : rows) distinct.insert(r.L);
  if (distinct.size() < 3) {
    throw InputError("fit_scaling needs at least 3 distinct L values; got " + std::to_string(distinct.size()));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    const double x = static_cast<double>(r.L) * std::log(static_cast<double>(r.L));
    const double y = r.mean_questions;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  ScalingFit fit;
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  const double mean_y = sy / n;
  double ss_res = 0, ss_tot = 0;
  for (const auto& r : rows) {
    const double x = static_cast<double>(r.L) * std::log(static_cast<double>(r.L));
    const double e = r.mean_questions - (fit.slope * x + fit.intercept);
    ss_res += e * e;
    ss_tot += (r.mean_questions - mean_y) * (r.mean_questions - mean_y);
  }
  fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double total_variation(const Distribution& a, const Distribution& b) {
  double sum = 0.0;
  for (const auto& [order, pa] : a) {
    const auto it = b.find(order);
    sum += std::abs(pa - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [order, pb] : b) {
    if (!a.count(order)) sum += pb;
  }
  return 0.5 * sum;
}

namespace {

double ratio_power(double rho, std::uint64_t k) {
  if (k == 0) return 1.0;
  return rho == 0.0 ? 0.0 : std::pow(rho, static_cast<double>(k));
}

void require_known_small(const MeasurementLog& log, const ErrorModel& model, const char* what) {
  if (!model.is_known()) throw InputError(std::string(what) + " needs a known p");
  if (log.dimension() > kBruteForceMaxSize) throw InputError(std::string(what) + " refused for L > 8");
}

void chain(const MeasurementLog& log, double rho, std::vector<ElementId>& remaining, std::vector<ElementId>& top_down,
           double prob, Distribution& out) {
  if (remaining.size() == 1) {
    std::vector<ElementId> order{remaining.front()};
    order.insert(order.end(), top_down.rbegin(), top_down.rend());
    out[Ordering(order)] += prob;
    return;
  }
  std::vector<double> beta(remaining.size());
  double z = 0.0;
  for (std::size_t i = 0; i < remaining.size(); ++i) {
    beta[i] = ratio_power(rho, n_dispute(remaining[i], remaining, log));
    z += beta[i];
  }
  if (z == 0.0) return;
  for (std::size_t i = 0; i < remaining.size(); ++i) {
    if (beta[i] == 0.0) continue;
    const ElementId e = remaining[i];
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(i));
    top_down.push_back(e);
    chain(log, rho, remaining, top_down, prob * beta[i] / z, out);
    top_down.pop_back();
    remaining.insert(remaining.begin() + static_cast<std::ptrdiff_t>(i), e);
  }
}

// Law of the recursive sampler over arrangements of `elements`.
std::map<std::vector<ElementId>, double> partition_law(const MeasurementLog& log, double rho,
                                                       const std::vector<ElementId>& elements) {
  std::map<std::vector<ElementId>, double> law;
  if (elements.size() == 1) {
    law[elements] = 1.0;
    return law;
  }
  const std::size_t k = elements.size();
  const std::size_t lower_size = k / 2;
  std::vector<std::pair<std::uint32_t, double>> splits;
  double z = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != lower_size) continue;
    std::uint64_t disputes = 0;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        const bool a_lower = mask >> a & 1u;
        const bool b_lower = mask >> b & 1u;
        if (!a_lower && b_lower) disputes += log.count(elements[a], elements[b]);
      }
    }
    const double w = ratio_power(rho, disputes);
    splits.emplace_back(mask, w);
    z += w;
  }
  for (const auto& [mask, w] : splits) {
    if (w == 0.0) continue;
    std::vector<ElementId> lower, upper;
    for (std::size_t a = 0; a < k; ++a) (mask >> a & 1u ? lower : upper).push_back(elements[a]);
    const auto lower_law = partition_law(log, rho, lower);
    const auto upper_law = partition_law(log, rho, upper);
    for (const auto& [lo, plo] : lower_law) {
      for (const auto& [up, pup] : upper_law) {
        std::vector<ElementId> joined = lo;
        joined.insert(joined.end(), up.begin(), up.end());
        law[joined] += w / z * plo * pup;
      }
    }
  }
  return law;
}

}  // namespace

Distribution max_element_chain_distribution(const MeasurementLog& log, const ErrorModel& model) {
  require_known_small(log, model, "max_element_chain_distribution");
  std::vector<ElementId> remaining(log.dimension());
  std::iota(remaining.begin(), remaining.end(), ElementId{0});
  std::vector<ElementId> top_down;
  Distribution out;
  chain(log, dispute_ratio(model.p()), remaining, top_down, 1.0, out);
  return out;
}

Distribution recursive_partition_distribution(const MeasurementLog& log, const ErrorModel& model) {
  require_known_small(log, model, "recursive_partition_distribution");
  std::vector<ElementId> all(log.dimension());
  std::iota(all.begin(), all.end(), ElementId{0});
  Distribution out;
  for (auto& [order, p] : partition_law(log, dispute_ratio(model.p()), all)) {
    out[Ordering(order)] += p;
  }
  return out;
}

Distribution empirical_distribution(SamplerKind sampler, const MeasurementLog& log, const ErrorModel& model,
                                    std::size_t samples, std::uint64_t seed) {
  auto rng = RandomStream::derive(seed, {static_cast<std::uint64_t>(sampler)});
  std::vector<ElementId> all(log.dimension());
  std::iota(all.begin(), all.end(), ElementId{0});
  std::map<std::vector<ElementId>, std::size_t> counts;
  for (std::size_t s = 0; s < samples; ++s) {
    switch (sampler) {
      case SamplerKind::Naive: {
        const auto r = naive_rejection_sample(log, model, rng);
        ++counts[std::vector<ElementId>(r.order.begin(), r.order.end())];
        break;
      }
      case SamplerKind::RecursivePartition:
        ++counts[recursive_partition_sample(all, log, model, rng, {}).order];
        break;
      case SamplerKind::MaxElement:
        ++counts[max_element_sample(all, log, model, rng, {}).order];
        break;
      case SamplerKind::Incremental:
        throw InputError("the incremental sampler does not sample from scratch");
    }
  }
  Distribution out;
  for (const auto& [order, c] : counts) {
    out[Ordering(order)] = static_cast<double>(c) / static_cast<double>(samples);
  }
  return out;
}

std::vector<SamplerQuality> sampler_quality_report(const MeasurementLog& log, const ErrorModel& model,
                                                   std::size_t samples, std::uint64_t seed) {
  if (log.dimension() > kQualityMaxSize) {
    throw InputError("sampler_quality_report refused for L = " + std::to_string(log.dimension()) + " (limit " +
                     std::to_string(kQualityMaxSize) + ")");
  }
  if (samples == 0) throw InputError("sampler_quality_report needs at least one sample");
  const auto exact = brute_force_posterior(log, model);
  double floor_sum = 0.0;
  for (const auto& [order, p] : exact) {
    floor_sum += std::sqrt(2.0 * p * (1.0 - p) / (std::numbers::pi * static_cast<double>(samples)));
  }
  const double noise_floor = 0.5 * floor_sum;

  std::vector<SamplerQuality> report;
  for (auto kind : {SamplerKind::Naive, SamplerKind::RecursivePartition, SamplerKind::MaxElement}) {
    SamplerQuality q;
    q.sampler = kind;
    q.samples = samples;
    q.tv = total_variation(empirical_distribution(kind, log, model, samples, seed), exact);
    q.noise_floor = noise_floor;
    q.analytic_tv = std::numeric_limits<double>::quiet_NaN();
    if (kind == SamplerKind::Naive) {
      q.analytic_tv = 0.0;
    } else if (model.is_known()) {
      q.analytic_tv = total_variation(kind == SamplerKind::MaxElement ? max_element_chain_distribution(log, model)
                                                                     : recursive_partition_distribution(log, model),
                                      exact);
    }
    report.push_back(q);
  }
  return report;
}

}  // namespace noisyrank::bench
