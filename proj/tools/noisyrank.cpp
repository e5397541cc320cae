// noisyrank: interactive sorting, simulation sweeps, the HTTP service and
// the self-check suite.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "noisyrank/bench.hpp"
#include "noisyrank/errors.hpp"
#include "noisyrank/service.hpp"
#include "noisyrank/verify.hpp"

namespace fs = std::filesystem;
using namespace noisyrank;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t effective_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("NOISYRANK_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used, 0);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("NOISYRANK_SEED is not an unsigned integer: '") + env + "'");
  }
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) | rd();
}

void print_seed(std::uint64_t seed) { std::cerr << "seed: " << seed << "\n"; }

std::vector<std::string> read_items(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read items file " + path.string());
  std::vector<std::string> items;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    items.push_back(line);
  }
  return items;
}

// --- sort -------------------------------------------------------------------

struct SortArgs {
  std::string items_file;
  std::vector<std::string> labels;
  std::optional<double> p;
  bool unknown_p = false;
  std::size_t n = 100;
  double epsilon = 0.01;
  std::string strategy = "full";
  std::optional<std::uint64_t> seed;
  std::string resume;
  std::string save = "noisyrank-session";
};

std::string g_interrupt_message;

extern "C" void on_interrupt(int) {
  const auto& m = g_interrupt_message;
  [[maybe_unused]] auto n = ::write(STDERR_FILENO, m.data(), m.size());
  _exit(130);
}

void print_ranking(const RankingResult& r) {
  for (std::size_t k = 0; k < r.ranking.size(); ++k) {
    std::cout << k + 1 << ". " << r.ranking[k] << "\n";
  }
  std::cout << "confidence: " << r.confidence * 100.0 << "%" << (r.final ? "" : " (not converged)") << "\n";
}

int run_sort(const SortArgs& a) {
  std::unique_ptr<Session> session;
  fs::path dir;
  if (!a.resume.empty()) {
    dir = a.resume;
    if (!fs::exists(dir / "meta.json")) throw UsageError("no saved session in " + dir.string());
    session = Session::load("cli", dir);
    print_seed(session->meta().config.seed);
  } else {
    std::vector<std::string> labels = a.labels;
    if (!a.items_file.empty()) {
      if (!labels.empty()) throw UsageError("give either --items or inline labels, not both");
      labels = read_items(a.items_file);
    }
    if (labels.size() < 2) throw UsageError("need at least two items to sort");
    dir = a.save;
    if (fs::exists(dir / "meta.json")) {
      throw UsageError("a session is already saved in " + dir.string() + "; use --resume " + dir.string() +
                       " or pick another --save directory");
    }
    const std::uint64_t seed = effective_seed(a.seed);
    print_seed(seed);
    nlohmann::json config = {{"N", a.n}, {"epsilon", a.epsilon}, {"strategy", a.strategy}};
    if (a.p) {
      config["error_mode"] = "known";
      config["p"] = *a.p;
    } else {
      config["error_mode"] = "unknown";
    }
    SessionMeta meta = SessionMeta::from_request({{"labels", labels}, {"config", config}, {"seed", seed}}, seed);
    session = Session::create("cli", dir, std::move(meta));
  }

  const std::string resume_hint = "session saved; continue with: noisyrank sort --resume " + dir.string() + "\n";
  g_interrupt_message = "\n" + resume_hint;
  std::signal(SIGINT, on_interrupt);

  while (true) {
    Question q;
    try {
      q = session->question();
    } catch (const SessionOverError& e) {
      print_ranking(e.result());
      return kExitOk;
    }
    std::cerr << "1: " << q.label_i << "  2: " << q.label_j << " — which do you prefer? " << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) {
      std::cerr << "\n" << resume_hint;
      return kExitOk;
    }
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    ElementId lesser;
    if (line == "1") {
      lesser = q.j;
    } else if (line == "2") {
      lesser = q.i;
    } else {
      std::cerr << "please answer 1 or 2\n";
      continue;
    }
    session->answer(lesser, q.seq);
  }
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string sweep_file;
  std::vector<std::size_t> L;
  std::vector<double> p;
  std::vector<std::size_t> N;
  std::optional<double> epsilon;
  std::optional<std::size_t> trials;
  std::vector<std::string> strategies;
  std::string error_mode;
  std::optional<std::uint64_t> max_questions;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
  bool no_timing = false;
};

int run_simulate(const SimulateArgs& a) {
  bench::SweepConfig config;
  bool seed_from_file = false;
  if (!a.sweep_file.empty()) {
    std::ifstream in(a.sweep_file);
    if (!in) throw UsageError("cannot read sweep config " + a.sweep_file);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("sweep config is not valid JSON: " + std::string(e.what()));
    }
    config = bench::SweepConfig::from_json(j);
    seed_from_file = j.contains("seed");
  }
  if (!a.L.empty()) config.L_values = a.L;
  if (!a.p.empty()) config.p_values = a.p;
  if (!a.N.empty()) config.N_values = a.N;
  if (a.epsilon) config.epsilon = *a.epsilon;
  if (a.trials) config.trials_per_cell = *a.trials;
  if (!a.strategies.empty()) {
    config.strategies.clear();
    for (const auto& s : a.strategies) config.strategies.push_back(parse_query_strategy(s));
  }
  if (!a.error_mode.empty()) {
    config.error_model_mode = a.error_mode == "unknown" ? bench::ErrorModelMode::Unknown : bench::ErrorModelMode::Known;
  }
  if (a.max_questions) config.max_questions = a.max_questions;
  if (a.jobs) config.jobs = *a.jobs;
  if (a.seed || !seed_from_file) config.seed = effective_seed(a.seed);
  print_seed(config.seed);
  config.validate();

  const auto rows = bench::run_sweep(config);
  const std::string csv = bench::format_sweep_csv(rows, !a.no_timing);
  std::size_t errors = 0;
  for (const auto& r : rows) {
    errors += r.errors;
    std::cerr << "L=" << r.L << " p=" << r.p << " N=" << r.N << " " << to_string(r.strategy)
              << ": failure " << r.failure_rate << ", mean questions " << r.mean_questions << "\n";
  }

  nlohmann::json meta = {{"config", config.to_json()}, {"seed", config.seed}, {"timing", !a.no_timing}};
  try {
    const auto fit = bench::fit_scaling(rows);
    meta["scaling_fit"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}};
  } catch (const InputError&) {
    // fewer than three list lengths; nothing to fit
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << csv;
  } else {
    std::ofstream out(a.out, std::ios::binary);
    out << csv;
    if (!out) throw std::runtime_error("cannot write " + a.out);
    std::ofstream side(a.out + ".meta.json", std::ios::binary);
    side << meta.dump(2) << "\n";
    std::cerr << "wrote " << a.out << " and " << a.out << ".meta.json\n";
  }
  if (errors > 0) {
    std::cerr << errors << " trial(s) raised errors\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// --- serve / verify ---------------------------------------------------------

int run_serve(const std::string& host, int port, const std::string& data_dir) {
  SessionStore store(data_dir);
  std::cerr << "serving on http://" << host << ":" << port << " (data in " << data_dir << ")\n";
  if (!serve(store, host, port)) {
    std::cerr << "cannot listen on " << host << ":" << port << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int run_verify(const std::string& level_text, const std::string& report, std::optional<std::uint64_t> seed_flag,
               const std::string& fault) {
  const auto level = verify::parse_level(level_text);
  verify::Options options;
  // The checks are deterministic by default; random seeds are opt-in.
  if (seed_flag || std::getenv("NOISYRANK_SEED")) options.seed = effective_seed(seed_flag);
  print_seed(options.seed);
  if (fault == "accept-ratio") {
    options.keep_ratio = [](double f) { return f / (1.0 - f); };
  } else if (!fault.empty()) {
    throw UsageError("unknown fault '" + fault + "'");
  }
  options.on_result = [](const verify::CheckResult& r) { std::cout << verify::format_line(r) << std::endl; };
  const auto results = verify::run(level, options);
  const bool ok = verify::all_passed(results);
  if (!report.empty()) {
    std::ofstream out(report);
    out << verify::report_json(level, options.seed, results).dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + report);
  }
  for (const auto& r : results) {
    if (!r.passed) std::cerr << "failed: " << r.id << " " << r.name << "\n";
  }
  std::cout << (ok ? "all checks passed" : "some checks failed") << "\n";
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sort a list from noisy pairwise judgements"};
  app.require_subcommand(1);

  SortArgs sort_args;
  auto* sort = app.add_subcommand("sort", "Sort items interactively in the terminal");
  sort->add_option("labels", sort_args.labels, "Items to sort");
  sort->add_option("--items", sort_args.items_file, "File with one item per line")->check(CLI::ExistingFile);
  auto* p_opt = sort->add_option("--p", sort_args.p, "Known probability that a judgement is right, in (0.5, 1]");
  auto* u_opt = sort->add_flag("--unknown-p", sort_args.unknown_p, "Treat judgement reliability as unknown (default)");
  p_opt->excludes(u_opt);
  sort->add_option("--n", sort_args.n, "Ensemble size")->capture_default_str();
  sort->add_option("--epsilon", sort_args.epsilon, "Stop when one order holds more than 1 - epsilon")
      ->capture_default_str();
  sort->add_option("--strategy", sort_args.strategy, "Question selection: full | adjacent")
      ->check(CLI::IsMember({"full", "adjacent"}))
      ->capture_default_str();
  sort->add_option("--seed", sort_args.seed, "Random seed (default: $NOISYRANK_SEED or random)");
  sort->add_option("--save", sort_args.save, "Directory for the session journal")->capture_default_str();
  sort->add_option("--resume", sort_args.resume, "Continue the session saved in this directory");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation sweep against a noisy oracle");
  simulate->add_option("--sweep", sim.sweep_file, "JSON sweep config");
  simulate->add_option("--L", sim.L, "List lengths")->delimiter(',');
  simulate->add_option("--p", sim.p, "Oracle reliabilities")->delimiter(',');
  simulate->add_option("--N", sim.N, "Ensemble sizes")->delimiter(',');
  simulate->add_option("--epsilon", sim.epsilon, "Convergence tolerance");
  simulate->add_option("--trials", sim.trials, "Trials per grid cell");
  simulate->add_option("--strategy", sim.strategies, "full and/or adjacent")
      ->delimiter(',')
      ->check(CLI::IsMember({"full", "adjacent"}));
  simulate->add_option("--error-mode", sim.error_mode, "known (default) | unknown")
      ->check(CLI::IsMember({"known", "unknown"}));
  simulate->add_option("--max-questions", sim.max_questions, "Question cap per trial");
  simulate->add_option("--seed", sim.seed, "Sweep seed");
  simulate->add_option("--jobs", sim.jobs, "Worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim.out, "CSV output path (default stdout)");
  simulate->add_flag("--no-timing", sim.no_timing, "Write the wall-time column as 0 for byte-stable output");

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "noisyrank-data";
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP session service");
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--port", port)->check(CLI::Range(1, 65535))->capture_default_str();
  serve_cmd->add_option("--data-dir", data_dir)->capture_default_str();

  std::string level = "quick";
  std::string report;
  std::optional<std::uint64_t> verify_seed;
  std::string fault;
  auto* verify_cmd = app.add_subcommand("verify", "Run the self-check suite");
  verify_cmd->add_option("--level", level, "quick | full")
      ->check(CLI::IsMember({"quick", "full"}))
      ->capture_default_str();
  verify_cmd->add_option("--report", report, "Write a JSON report here");
  verify_cmd->add_option("--seed", verify_seed, "Seed for the checks");
  verify_cmd->add_option("--plant-fault", fault, "Deliberately break the code under test")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sort) return run_sort(sort_args);
    if (*simulate) return run_simulate(sim);
    if (*serve_cmd) return run_serve(host, port, data_dir);
    if (*verify_cmd) return run_verify(level, report, verify_seed, fault);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.field() << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
