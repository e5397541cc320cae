#pragma once

#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "noisyrank/core_model.hpp"
#include "noisyrank/random.hpp"

namespace noisyrank::test {

inline MeasurementLog random_log(std::size_t dimension, std::size_t records, RandomStream& rng) {
  MeasurementLog log(dimension);
  for (std::size_t k = 0; k < records; ++k) {
    const auto a = static_cast<ElementId>(rng.uniform_index(dimension));
    auto b = static_cast<ElementId>(rng.uniform_index(dimension - 1));
    if (b >= a) ++b;
    log.append(a, b);
  }
  return log;
}

inline Ordering random_order(std::size_t dimension, RandomStream& rng) {
  std::vector<ElementId> perm(dimension);
  std::iota(perm.begin(), perm.end(), ElementId{0});
  rng.shuffle(std::span<ElementId>(perm));
  return Ordering(std::move(perm));
}

// Fresh empty directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    RandomStream rng(reinterpret_cast<std::uintptr_t>(this) ^ static_cast<std::uint64_t>(::time(nullptr)));
    path_ = std::filesystem::temp_directory_path() / ("noisyrank-test-" + std::to_string(rng.next_u64()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace noisyrank::test
