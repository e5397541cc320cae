// Runs every acceptance criterion at full size and prints one line each.
// Exit status is non-zero if any criterion fails.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "noisyrank/verify.hpp"

int main(int argc, char** argv) {
  using namespace noisyrank::verify;
  Options options;
  if (const char* env = std::getenv("NOISYRANK_SEED"); env && *env) options.seed = std::strtoull(env, nullptr, 0);
  options.on_result = [](const CheckResult& r) {
    std::cout << "criterion " << r.id << ": " << (r.passed ? "PASS" : "FAIL") << " " << r.name << " | " << r.detail
              << " | margin " << r.margin << " | " << r.seconds << " s" << std::endl;
  };
  std::cout << "acceptance suite, seed " << options.seed << std::endl;
  const auto results = run(Level::Full, options);
  std::size_t failed = 0;
  for (const auto& r : results) failed += !r.passed;
  if (argc > 1) {
    std::ofstream(argv[1]) << report_json(Level::Full, options.seed, results).dump(2) << "\n";
  }
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
