#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>

namespace noisyrank {

/// Counter-based random stream. Draw k is a pure function of (seed, k), so a
/// stream can be reconstructed anywhere from its seed and counter. The mixer
/// is SplitMix64, and all derived distributions are implemented here so that
/// results do not depend on the standard library's distribution code.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0, std::uint64_t counter = 0) noexcept
      : seed_(seed), counter_(counter) {}

  /// Independent substream keyed by a list of integers, e.g.
  /// (session seed, candidate index, measurement sequence number).
  static RandomStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) with 53 bits of resolution.
  double uniform() noexcept;

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  /// Bernoulli(prob); prob >= 1 never consumes less than one draw.
  bool bernoulli(double prob) noexcept { return uniform() < prob; }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // UniformRandomBitGenerator surface, for callers that want <random>.
  using result_type = std::uint64_t;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept { return next_u64(); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace noisyrank
