#include "noisyrank/oracles.hpp"

#include <string>

#include "noisyrank/errors.hpp"

namespace noisyrank {

namespace {

bool answers_pair(const Response& r, ElementId i, ElementId j) {
  return (r.lesser == i && r.greater == j) || (r.lesser == j && r.greater == i);
}

}  // namespace

SimulatedOracle::SimulatedOracle(Ordering truth, double p_true, RandomStream rng)
    : truth_(std::move(truth)), position_(truth_.positions()), p_true_(p_true), rng_(rng) {
  if (!(p_true > 0.5 && p_true <= 1.0)) {
    throw ValidationError("p_true", "simulated oracle needs 0.5 < p_true <= 1; got " + std::to_string(p_true));
  }
}

std::optional<Response> SimulatedOracle::ask(ElementId i, ElementId j) {
  if (i == j || i >= truth_.size() || j >= truth_.size()) {
    throw InputError("simulated oracle asked an invalid pair");
  }
  ++asks_;
  const bool i_first = position_[i] < position_[j];
  Response truthful = i_first ? Response{i, j} : Response{j, i};
  if (rng_.uniform() < p_true_) {
    return truthful;
  }
  return Response{truthful.greater, truthful.lesser};
}

ScriptedOracle::ScriptedOracle(std::vector<Response> transcript) : transcript_(std::move(transcript)) {}

ScriptedOracle ScriptedOracle::from_journal(const MeasurementLog& journal) {
  std::vector<Response> transcript;
  transcript.reserve(journal.size());
  for (const Measurement& m : journal.records()) {
    transcript.push_back({m.lesser, m.greater});
  }
  return ScriptedOracle(std::move(transcript));
}

std::optional<Response> ScriptedOracle::ask(ElementId i, ElementId j) {
  if (next_ >= transcript_.size()) {
    throw ReplayError("transcript exhausted after " + std::to_string(transcript_.size()) + " answers");
  }
  const Response r = transcript_[next_];
  if (!answers_pair(r, i, j)) {
    throw ReplayError("transcript entry " + std::to_string(next_ + 1) + " answers (" + std::to_string(r.lesser) +
                      "," + std::to_string(r.greater) + ") but the engine asked (" + std::to_string(i) + "," +
                      std::to_string(j) + ")");
  }
  ++next_;
  return r;
}

std::optional<Response> InteractiveOracle::ask(ElementId i, ElementId j) {
  std::unique_lock lock(mutex_);
  if (question_ != std::pair{i, j}) {
    question_ = std::pair{i, j};
    answer_.reset();
  }
  if (!answer_ && timeout_ > std::chrono::milliseconds::zero()) {
    arrived_.wait_for(lock, timeout_, [this] { return answer_.has_value(); });
  }
  if (!answer_) {
    return std::nullopt;
  }
  auto r = *answer_;
  answer_.reset();
  question_.reset();
  return r;
}

void InteractiveOracle::post(Response answer) {
  {
    std::lock_guard lock(mutex_);
    if (!question_) {
      throw StateError("no question is pending");
    }
    if (!answers_pair(answer, question_->first, question_->second)) {
      throw InputError("answer does not name the pending pair");
    }
    answer_ = answer;
  }
  arrived_.notify_all();
}

std::optional<std::pair<ElementId, ElementId>> InteractiveOracle::pending() const {
  std::lock_guard lock(mutex_);
  return question_;
}

}  // namespace noisyrank
