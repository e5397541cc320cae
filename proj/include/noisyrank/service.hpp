#pragma once

// Session hosting for human-in-the-loop sorting. A session on disk is a
// directory holding meta.json (labels, config, model, seed) and the journal;
// the engine is rebuilt by replay, never snapshotted.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "noisyrank/engine.hpp"
#include "noisyrank/errors.hpp"
#include "noisyrank/journal.hpp"

#include <json.hpp>

namespace httplib {
class Server;
}

namespace noisyrank {

inline constexpr std::size_t kMaxLabels = 4096;

struct SessionMeta {
  std::vector<std::string> labels;
  ErrorModel model = ErrorModel::unknown();
  EngineConfig config;

  /// Parses a create request: {labels, config?: {N, epsilon, strategy,
  /// error_mode, p, warm_start_threshold, max_questions}, seed?}. A missing
  /// seed is filled from `fallback_seed`. Throws ValidationError.
  static SessionMeta from_request(const nlohmann::json& body, std::uint64_t fallback_seed);
  /// Round-trips through meta.json.
  static SessionMeta from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Throws ValidationError unless 2 <= size <= kMaxLabels and labels are
/// distinct and non-empty.
void validate_labels(const std::vector<std::string>& labels);

struct Question {
  ElementId i = 0;
  ElementId j = 0;
  std::string label_i;
  std::string label_j;
  double progress = 0.0;
  std::uint64_t questions_asked = 0;
  /// Sequence number the answer will be journalled under.
  std::uint64_t seq = 0;
};

struct RankingResult {
  std::vector<std::string> ranking;  // most preferred first
  bool final = false;
  double confidence = 0.0;
  std::uint64_t questions_asked = 0;
  EngineStatus status = EngineStatus::AwaitingAnswer;
};

// Unknown session id.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The session has converged or hit its question cap.
class SessionOverError : public StateError {
 public:
  SessionOverError(const std::string& what, RankingResult result) : StateError(what), result_(std::move(result)) {}
  const RankingResult& result() const noexcept { return result_; }

 private:
  RankingResult result_;
};

/// 32 hex characters from the system entropy source.
std::string random_session_id();

/// Called after the journal append and before the engine sees the answer.
/// Throwing from it simulates a crash at that point.
using AfterAppendHook = std::function<void(const std::string& id, const Measurement& m)>;

class Session {
 public:
  /// Creates the directory, writes meta.json and an empty journal.
  static std::unique_ptr<Session> create(std::string id, const std::filesystem::path& dir, SessionMeta meta);
  /// Replays the journal in `dir`. A torn final record is discarded.
  static std::unique_ptr<Session> load(std::string id, const std::filesystem::path& dir);

  const std::string& id() const noexcept { return id_; }
  const SessionMeta& meta() const noexcept { return meta_; }

  /// Throws SessionOverError once the session is over.
  Question question() const;

  /// Journals "lesser < other element of the pending pair", then advances
  /// the engine. With `seq`, a value other than the pending sequence number
  /// raises IdempotencyError. Throws InputError if `lesser` is not in the
  /// pending pair, StateError if the session is over.
  EngineStatus answer(ElementId lesser, std::optional<std::uint64_t> seq, const AfterAppendHook& hook = {});

  RankingResult result() const;
  std::string trace_csv() const;

  /// Copies of the engine state, for cross-checks.
  std::optional<QueryPair> pending() const;
  Convergence convergence() const;
  MeasurementLog journal() const;

  /// Set when a hook threw mid-answer; the in-memory state is stale.
  bool poisoned() const noexcept { return poisoned_; }

 private:
  Session(std::string id, SessionMeta meta, Engine engine, JournalWriter writer);
  RankingResult result_locked() const;

  std::string id_;
  SessionMeta meta_;
  mutable std::shared_mutex mutex_;
  Engine engine_;
  JournalWriter writer_;
  std::atomic<bool> poisoned_{false};
};

class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path data_dir);

  /// Returns the new session id. Throws ValidationError.
  std::string create(const nlohmann::json& body);
  /// Loads from disk on first access. Throws NotFoundError.
  std::shared_ptr<Session> get(const std::string& id);

  /// Answers through the store so a crashed session is evicted and reloaded
  /// from its journal on next access.
  EngineStatus answer(const std::string& id, ElementId lesser, std::optional<std::uint64_t> seq);

  void set_after_append_hook(AfterAppendHook hook) { hook_ = std::move(hook); }
  const std::filesystem::path& data_dir() const noexcept { return data_dir_; }

 private:
  std::filesystem::path data_dir_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  AfterAppendHook hook_;
};


/// Registers the HTTP routes on `server`.
void mount_routes(httplib::Server& server, SessionStore& store);

/// Blocks serving on host:port until the server is stopped.
bool serve(SessionStore& store, const std::string& host, int port);

}  // namespace noisyrank
