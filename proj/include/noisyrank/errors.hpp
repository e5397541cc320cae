#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace noisyrank {

// Bad arguments: out-of-range ids, dimension mismatches, malformed files.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A rejection loop ran out of attempts; the caller should switch sampler.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// p = 1 and the journal contradicts itself, so no ordering has non-zero weight.
class InconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transcript exhausted or a replayed record does not match the engine.
class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration. `field` names the offending field.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string field, const std::string& what)
      : std::invalid_argument(what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Operation not allowed in the current session state.
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A second answer was submitted for an already answered question.
class IdempotencyError : public StateError {
 public:
  using StateError::StateError;
};

}  // namespace noisyrank
