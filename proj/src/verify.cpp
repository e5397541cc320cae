#include "noisyrank/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <algorithm>
#include <filesystem>
#include <limits>
#include <numeric>

#include "noisyrank/bench.hpp"
#include "noisyrank/errors.hpp"
#include "noisyrank/service.hpp"

namespace noisyrank::verify {

namespace {

std::string fmt(const char* format, ...) {
  char buf[2048];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// Holds `value` to be at most `bound`.
void at_most(CheckResult& r, double value, double bound) {
  r.value = value;
  r.threshold = bound;
  r.margin = bound - value;
  r.passed = value <= bound;
}

template <typename Fn>
CheckResult timed(const char* id, const char* name, const Options& options, Fn body) {
  CheckResult r;
  r.id = id;
  r.name = name;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("threw: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (options.on_result) options.on_result(r);
  return r;
}

MeasurementLog random_log(std::size_t dimension, std::size_t records, RandomStream& rng) {
  MeasurementLog log(dimension);
  for (std::size_t k = 0; k < records; ++k) {
    const auto a = static_cast<ElementId>(rng.uniform_index(dimension));
    auto b = static_cast<ElementId>(rng.uniform_index(dimension - 1));
    if (b >= a) ++b;
    log.append(a, b);
  }
  return log;
}

Ordering random_order(std::size_t dimension, RandomStream& rng) {
  std::vector<ElementId> perm(dimension);
  std::iota(perm.begin(), perm.end(), ElementId{0});
  rng.shuffle(std::span<ElementId>(perm));
  return Ordering(std::move(perm));
}

bench::SweepConfig sweep(std::vector<std::size_t> dims, std::size_t trials, QueryStrategy strategy,
                         std::uint64_t seed) {
  bench::SweepConfig c;
  c.L_values = std::move(dims);
  c.p_values = {0.9};
  c.N_values = {100};
  c.epsilon = 0.01;
  c.trials_per_cell = trials;
  c.strategies = {strategy};
  c.error_model_mode = bench::ErrorModelMode::Known;
  c.seed = seed;
  return c;
}

}  // namespace

Level parse_level(const std::string& text) {
  if (text == "quick") return Level::Quick;
  if (text == "full") return Level::Full;
  throw ValidationError("level", "level must be 'quick' or 'full'; got '" + text + "'");
}

CheckResult two_element_exactness(const Options& options, std::size_t ensemble_size) {
  return timed("1", "two-element exactness", options, [&](CheckResult& r) {
    double worst = 0.0;
    std::string where;
    const double ps[] = {0.6, 0.8, 0.95};
    for (std::size_t pi = 0; pi < 3; ++pi) {
      const ErrorModel model = ErrorModel::known(ps[pi]);
      EngineConfig config;
      config.ensemble_size = ensemble_size;
      config.seed = RandomStream::derive(options.seed, {1, pi}).next_u64();
      Ensemble ensemble = Ensemble::uniform(2, ensemble_size, config.seed);
      ResampleOptions ro;
      ro.keep_ratio = options.keep_ratio;
      auto script = RandomStream::derive(options.seed, {2, pi});
      MeasurementLog log(2);
      for (int step = 1; step <= 10; ++step) {
        const bool truthful = script.uniform() < ps[pi];
        const Measurement& m = truthful ? log.append(0, 1) : log.append(1, 0);
        apply_measurement(ensemble, m, log, model, config, ro);
        const double freq = static_cast<double>(ensemble.pair_count(0, 1)) / static_cast<double>(ensemble_size);
        const double exact = brute_force_posterior(log, model).at(Ordering({0, 1}));
        const double tv = std::abs(freq - exact);
        if (tv >= worst) {
          worst = tv;
          where = fmt("p=%.2f after %d records: ensemble %.4f vs posterior %.4f", ps[pi], step, freq, exact);
        }
      }
    }
    at_most(r, worst, 0.02);
    r.detail = fmt("max TV %.4f (N=%zu); worst %s", worst, ensemble_size, where.c_str());
  });
}

CheckResult naive_sampler_exactness(const Options& options, std::size_t max_dimension, std::size_t samples) {
  return timed("2", "naive sampler exactness", options, [&](CheckResult& r) {
    const ErrorModel model = ErrorModel::known(0.8);
    auto rng = RandomStream::derive(options.seed, {3});
    double worst = 0.0;
    std::string where;
    for (std::size_t dim = 3; dim <= max_dimension; ++dim) {
      for (int rep = 0; rep < 2; ++rep) {
        const std::size_t n = 1 + rng.uniform_index(8);
        const MeasurementLog log = random_log(dim, n, rng);
        const auto empirical =
            bench::empirical_distribution(SamplerKind::Naive, log, model, samples, rng.next_u64());
        const double tv = bench::total_variation(empirical, brute_force_posterior(log, model));
        if (tv >= worst) {
          worst = tv;
          where = fmt("L=%zu, %zu records", dim, n);
        }
      }
    }
    at_most(r, worst, 0.02);
    r.detail = fmt("max TV %.4f over L=3..%zu at %zu samples; worst %s", worst, max_dimension, samples,
                   where.c_str());
  });
}

CheckResult partition_gap(const Options& options, std::size_t samples) {
  return timed("3", "partition-sampler gap", options, [&](CheckResult& r) {
    const ErrorModel model = ErrorModel::known(0.8);
    MeasurementLog log(3);
    log.append(0, 1);
    const Ordering abc({0, 1, 2});
    const double exact = brute_force_posterior(log, model).at(abc);
    const double analytic = bench::max_element_chain_distribution(log, model).at(abc);
    const auto empirical = bench::empirical_distribution(SamplerKind::MaxElement, log, model, samples,
                                                         RandomStream::derive(options.seed, {4}).next_u64());
    const double measured = empirical.count(abc) ? empirical.at(abc) : 0.0;
    constexpr double kChain = 16.0 / 45.0;  // 0.3556
    constexpr double kExact = 4.0 / 15.0;   // 0.2667
    const double sigma = std::sqrt(kChain * (1 - kChain) / static_cast<double>(samples));
    const double deviation = std::abs(measured - kChain);
    const bool chain_ok = deviation <= 4 * sigma && std::abs(analytic - kChain) < 1e-12;
    const bool exact_ok = std::abs(exact - kExact) <= 0.005;
    const bool flagged = measured - exact > 4 * sigma;
    r.value = measured;
    r.threshold = kChain;
    r.margin = 4 * sigma - deviation;
    r.passed = chain_ok && exact_ok && flagged;
    r.detail = fmt("max-element P(a,b,c) measured %.4f (analytic %.4f, +-%.4f) vs exact posterior %.4f%s", measured,
                   analytic, sigma, exact,
                   flagged ? "; DISCREPANCY: the max-element sampler is not exact here" : "; discrepancy not seen");
  });
}

CheckResult unknown_p_consistency(const Options& options, std::size_t pairs) {
  return timed("4", "unknown-p sequential consistency", options, [&](CheckResult& r) {
    const ErrorModel model = ErrorModel::unknown();
    auto rng = RandomStream::derive(options.seed, {5});
    double worst = 0.0;
    for (std::size_t k = 0; k < pairs; ++k) {
      const std::size_t dim = 2 + rng.uniform_index(7);
      const MeasurementLog log = random_log(dim, rng.uniform_index(21), rng);
      const Ordering a = random_order(dim, rng);
      const Ordering b = random_order(dim, rng);
      auto sequential = [&](const Ordering& order) {
        const auto pos = order.positions();
        SampleBookkeeping bk;
        double sum = 0.0;
        for (const Measurement& m : log.records()) {
          const bool match = pos[m.lesser] < pos[m.greater];
          const double f = f_next(model, bk);
          sum += std::log(match ? f : 1.0 - f);
          ++bk.n_seen;
          bk.n_match += match;
        }
        return sum;
      };
      const double seq_log_ratio = sequential(a) - sequential(b);
      const double weight_log_ratio = posterior_weight(a, log, model) - posterior_weight(b, log, model);
      worst = std::max(worst, std::abs(std::expm1(seq_log_ratio - weight_log_ratio)));
    }
    at_most(r, worst, 1e-9);
    r.detail = fmt("max relative error %.3g over %zu (order, order, log) triples", worst, pairs);
  });
}

CheckResult accept_ratio_statistics(const Options& options, std::size_t trials) {
  return timed("5", "accept-ratio statistics", options, [&](CheckResult& r) {
    const double ps[] = {0.7, 0.9};
    r.passed = true;
    r.margin = std::numeric_limits<double>::infinity();
    std::string detail;
    for (std::size_t pi = 0; pi < 2; ++pi) {
      const ErrorModel model = ErrorModel::known(ps[pi]);
      MeasurementLog log(4);
      const Measurement m = log.append(0, 1);
      const Ordering inconsistent({2, 1, 3, 0});
      std::size_t kept = 0;
      for (std::size_t t = 0; t < trials; ++t) {
        auto rng = RandomStream::derive(options.seed, {6, pi, t});
        kept += incremental_resample(inconsistent, {}, m, log, model, rng).outcome ==
                ResampleOutcome::KeptInconsistent;
      }
      const double expected = (1 - ps[pi]) / ps[pi];
      const double freq = static_cast<double>(kept) / static_cast<double>(trials);
      const double half = 2.576 * std::sqrt(expected * (1 - expected) / static_cast<double>(trials));
      const double dev = std::abs(freq - expected);
      if (half - dev < r.margin) {
        r.margin = half - dev;
        r.value = dev;
        r.threshold = half;
      }
      r.passed = r.passed && dev <= half;
      detail += fmt("%sp=%.1f survived %.4f vs %.4f (99%% CI +-%.4f)", pi ? "; " : "", ps[pi], freq, expected, half);
    }
    r.detail = detail;
  });
}

CheckResult end_to_end(const Options& options, std::size_t trials) {
  return timed("6", "end-to-end correctness L=20", options, [&](CheckResult& r) {
    const auto rows = bench::run_sweep(sweep({20}, trials, QueryStrategy::FullPairs, options.seed));
    at_most(r, rows[0].failure_rate, 0.05);
    r.detail = fmt("failure rate %.3f over %zu trials, mean questions %.1f (sd %.1f), %zu errors", rows[0].failure_rate,
                   trials, rows[0].mean_questions, rows[0].questions_stddev, rows[0].errors);
  });
}

CheckResult scaling_law(const Options& options, std::size_t trials) {
  return timed("7", "L ln L scaling", options, [&](CheckResult& r) {
    const auto rows = bench::run_sweep(sweep({8, 16, 32, 64}, trials, QueryStrategy::FullPairs, options.seed));
    const auto fit = bench::fit_scaling(rows);
    r.value = fit.r_squared;
    r.threshold = 0.9;
    r.margin = fit.r_squared - 0.9;
    r.passed = fit.r_squared >= 0.9;
    std::string means;
    for (const auto& row : rows) means += fmt(" L=%zu:%.1f", row.L, row.mean_questions);
    r.detail = fmt("R^2 %.4f, slope %.3f, intercept %.2f; mean questions%s", fit.r_squared, fit.slope, fit.intercept,
                   means.c_str());
  });
}

CheckResult adjacent_strategy(const Options& options, std::size_t trials) {
  return timed("8", "adjacent-pair strategy", options, [&](CheckResult& r) {
    const auto full = bench::run_sweep(sweep({16}, trials, QueryStrategy::FullPairs, options.seed))[0];
    const auto adj = bench::run_sweep(sweep({16}, trials, QueryStrategy::AdjacentPairs, options.seed))[0];
    const double diff = std::abs(full.failure_rate - adj.failure_rate);
    const auto full64 = bench::run_sweep(sweep({64}, 2, QueryStrategy::FullPairs, options.seed))[0];
    const auto adj64 = bench::run_sweep(sweep({64}, 2, QueryStrategy::AdjacentPairs, options.seed))[0];
    const bool faster = adj64.mean_selection_micros < full64.mean_selection_micros;
    at_most(r, diff, 0.05);
    r.passed = r.passed && faster;
    r.detail = fmt("L=16 failure full %.3f vs adjacent %.3f (diff %.3f); L=64 selection %.2f us adjacent vs %.2f us "
                   "full%s",
                   full.failure_rate, adj.failure_rate, diff, adj64.mean_selection_micros,
                   full64.mean_selection_micros, faster ? "" : " (adjacent NOT faster)");
  });
}

CheckResult determinism_and_recovery(const Options& options) {
  return timed("9", "determinism and crash recovery", options, [&](CheckResult& r) {
    constexpr std::size_t kDim = 10;
    const ErrorModel model = ErrorModel::known(0.85);
    EngineConfig config;
    config.ensemble_size = 60;
    config.seed = options.seed;
    const Ordering truth = [&] {
      auto rng = RandomStream::derive(options.seed, {7});
      return random_order(kDim, rng);
    }();
    auto run_once = [&] {
      SimulatedOracle oracle(truth, 0.85, RandomStream::derive(options.seed, {8}));
      Engine engine(kDim, model, config);
      engine.run(oracle);
      return engine;
    };
    const Engine first = run_once();
    const Engine second = run_once();
    const Engine replayed = Engine::replay(kDim, model, config, first.log());
    const std::string trace = format_trace_csv(first.trace());
    const bool deterministic =
        trace == format_trace_csv(second.trace()) && trace == format_trace_csv(replayed.trace());

    // Crash after the journal append of answer #crash_at, before the engine update.
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / ("noisyrank-verify-" + random_session_id());
    constexpr std::uint64_t kCrashAt = 5;
    bool recovered = false;
    std::string why;
    {
      SessionStore store(dir);
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < kDim; ++i) labels.push_back("item" + std::to_string(i));
      const std::string id = store.create(
          {{"labels", labels}, {"config", {{"N", 60}, {"error_mode", "known"}, {"p", 0.85}}}, {"seed", options.seed}});
      store.set_after_append_hook([&](const std::string&, const Measurement& m) {
        if (m.sequence_number == kCrashAt) throw std::runtime_error("injected crash");
      });
      SimulatedOracle oracle(truth, 0.85, RandomStream::derive(options.seed, {8}));
      Engine reference(kDim, model, config);
      bool crashed = false;
      for (std::uint64_t k = 1; k <= kCrashAt && reference.pending(); ++k) {
        const auto q = *reference.pending();
        const Response a = *oracle.ask(q.i, q.j);
        reference.submit(a);
        try {
          store.answer(id, a.lesser, k);
        } catch (const std::runtime_error&) {
          crashed = k == kCrashAt;
        }
      }
      SessionStore restarted(dir);
      const auto s = restarted.get(id);
      const bool same_journal = s->journal().records().size() == reference.log().size() &&
                                format_journal(s->journal()) == format_journal(reference.log());
      const bool same_state = s->pending() == reference.pending() &&
                              s->convergence().modal_order == reference.convergence().modal_order &&
                              s->trace_csv() == format_trace_csv(reference.trace());
      // The original store must also recover instead of serving stale state.
      const bool store_recovered = store.get(id)->journal().size() == reference.log().size();
      recovered = crashed && same_journal && same_state && store_recovered;
      why = fmt("crash injected %s, journal %s, state %s, live store %s", crashed ? "yes" : "no",
                same_journal ? "intact" : "DIFFERS", same_state ? "matches" : "DIFFERS",
                store_recovered ? "reloaded" : "STALE");
    }
    std::error_code ec;
    fs::remove_all(dir, ec);

    r.passed = deterministic && recovered;
    r.value = r.passed ? 1.0 : 0.0;
    r.threshold = 1.0;
    r.margin = r.passed ? 0.0 : -1.0;
    r.detail = fmt("traces %s over %zu questions; %s", deterministic ? "identical" : "DIFFER",
                   static_cast<std::size_t>(first.questions_asked()), why.c_str());
  });
}

CheckResult dispute_bookkeeping(const Options& options, std::size_t max_dimension) {
  return timed("10", "incremental dispute bookkeeping", options, [&](CheckResult& r) {
    auto rng = RandomStream::derive(options.seed, {9});
    std::uint64_t checks = 0;
    std::uint64_t mismatches = 0;
    std::vector<std::size_t> dims;
    for (std::size_t d : {2, 3, 5, 8, 17, 40, 100, 256}) {
      if (d <= max_dimension) dims.push_back(d);
    }
    for (std::size_t dim : dims) {
      for (int rep = 0; rep < 3; ++rep) {
        const MeasurementLog log = random_log(dim, rng.uniform_index(4 * dim + 1), rng);
        const ErrorModel model = rep == 2 ? ErrorModel::unknown() : ErrorModel::known(rep ? 0.9 : 0.6);
        std::vector<ElementId> elements(dim);
        std::iota(elements.begin(), elements.end(), ElementId{0});
        rng.shuffle(std::span<ElementId>(elements));
        SampleBookkeeping start{0, 0};
        auto sample_rng = RandomStream::derive(options.seed, {10, dim, static_cast<std::uint64_t>(rep)});
        const auto sample = max_element_sample(
            elements, log, model, sample_rng, start,
            [&](std::span<const ElementId> remaining, std::span<const double>, const DisputeTracker& tracker) {
              for (ElementId e : remaining) {
                ++checks;
                mismatches += tracker.disputes(e) != n_dispute(e, remaining, log);
              }
            });
        const Ordering order(sample.order);
        ++checks;
        mismatches += !(sample.bk == SampleBookkeeping{log.size(), n_match(order, log)});
      }
    }
    at_most(r, static_cast<double>(mismatches), 0.0);
    r.detail = fmt("%llu mismatches in %llu comparisons, L up to %zu", static_cast<unsigned long long>(mismatches),
                   static_cast<unsigned long long>(checks), dims.back());
  });
}

std::vector<CheckResult> run(Level level, const Options& options) {
  std::vector<CheckResult> out;
  if (level == Level::Quick) {
    out.push_back(two_element_exactness(options));
    out.push_back(naive_sampler_exactness(options, 4));
    out.push_back(partition_gap(options));
    out.push_back(unknown_p_consistency(options));
    out.push_back(accept_ratio_statistics(options));
    out.push_back(determinism_and_recovery(options));
    out.push_back(dispute_bookkeeping(options));
    return out;
  }
  out.push_back(two_element_exactness(options));
  out.push_back(naive_sampler_exactness(options));
  out.push_back(partition_gap(options));
  out.push_back(unknown_p_consistency(options));
  out.push_back(accept_ratio_statistics(options));
  out.push_back(end_to_end(options));
  out.push_back(scaling_law(options));
  out.push_back(adjacent_strategy(options));
  out.push_back(determinism_and_recovery(options));
  out.push_back(dispute_bookkeeping(options));
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

nlohmann::json report_json(Level level, std::uint64_t seed, const std::vector<CheckResult>& results) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& r : results) {
    checks.push_back({{"id", r.id},
                      {"name", r.name},
                      {"passed", r.passed},
                      {"value", r.value},
                      {"threshold", r.threshold},
                      {"margin", r.margin},
                      {"detail", r.detail},
                      {"seconds", r.seconds}});
  }
  return {{"level", level == Level::Quick ? "quick" : "full"},
          {"seed", seed},
          {"passed", all_passed(results)},
          {"checks", checks}};
}

std::string format_line(const CheckResult& r) {
  return fmt("[%s] %s %s: %s (margin %.4g, %.1f s)", r.passed ? "PASS" : "FAIL", r.id.c_str(), r.name.c_str(),
             r.detail.c_str(), r.margin, r.seconds);
}

}  // namespace noisyrank::verify
