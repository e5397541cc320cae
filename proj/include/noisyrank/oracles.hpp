#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

#include "noisyrank/core_model.hpp"
#include "noisyrank/random.hpp"

namespace noisyrank {

/// An answer to "is i < j?", stated as the judged orientation.
struct Response {
  ElementId lesser = 0;
  ElementId greater = 0;

  bool operator==(const Response&) const = default;
};

/// Source of judgements. ask() returns std::nullopt when no answer is
/// available yet; the engine then suspends and can be re-entered later.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual std::optional<Response> ask(ElementId i, ElementId j) = 0;
};

/// Noisy channel around a hidden true order: the true orientation with
/// probability p_true, the reverse otherwise, independently on every ask.
class SimulatedOracle final : public Oracle {
 public:
  /// Throws ValidationError unless 0.5 < p_true <= 1.
  SimulatedOracle(Ordering truth, double p_true, RandomStream rng);

  std::optional<Response> ask(ElementId i, ElementId j) override;

  const Ordering& truth() const noexcept { return truth_; }
  std::uint64_t asks() const noexcept { return asks_; }

 private:
  Ordering truth_;
  std::vector<std::uint32_t> position_;
  double p_true_;
  RandomStream rng_;
  std::uint64_t asks_ = 0;
};

/// Replays a fixed transcript. Throws ReplayError when the transcript is
/// exhausted or the next entry does not answer the pair being asked.
class ScriptedOracle final : public Oracle {
 public:
  explicit ScriptedOracle(std::vector<Response> transcript);
  static ScriptedOracle from_journal(const MeasurementLog& journal);

  std::optional<Response> ask(ElementId i, ElementId j) override;

  std::size_t remaining() const noexcept { return transcript_.size() - next_; }

 private:
  std::vector<Response> transcript_;
  std::size_t next_ = 0;
};

/// Mailbox for answers arriving from another thread (a web request, a
/// terminal reader). ask() waits at most `timeout` for an answer to the
/// posted question and otherwise returns std::nullopt.
class InteractiveOracle final : public Oracle {
 public:
  explicit InteractiveOracle(std::chrono::milliseconds timeout = std::chrono::milliseconds::zero())
      : timeout_(timeout) {}

  std::optional<Response> ask(ElementId i, ElementId j) override;

  /// Delivers an answer. Throws InputError if it does not name exactly the
  /// pending pair, StateError if no question is pending.
  void post(Response answer);

  /// The question currently waiting for an answer, if any.
  std::optional<std::pair<ElementId, ElementId>> pending() const;

 private:
  std::chrono::milliseconds timeout_;
  mutable std::mutex mutex_;
  std::condition_variable arrived_;
  std::optional<std::pair<ElementId, ElementId>> question_;
  std::optional<Response> answer_;
};

}  // namespace noisyrank
