#include "noisyrank/service.hpp"

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <httplib.h>

namespace noisyrank {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMetaFile = "meta.json";
constexpr const char* kJournalFile = "journal";

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

template <typename T>
T field_as(const json& obj, const char* key, const char* what) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(key, std::string(key) + " must be " + what);
  }
}

void write_file_synced(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

// --- Meta -------------------------------------------------------------------

void validate_labels(const std::vector<std::string>& labels) {
  if (labels.size() < 2 || labels.size() > kMaxLabels) {
    throw ValidationError("labels", "need between 2 and " + std::to_string(kMaxLabels) + " labels; got " +
                                        std::to_string(labels.size()));
  }
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (l.empty()) throw ValidationError("labels", "labels must be non-empty");
    if (!seen.insert(l).second) throw ValidationError("labels", "duplicate label '" + l + "'");
  }
}

SessionMeta SessionMeta::from_request(const json& body, std::uint64_t fallback_seed) {
  if (!body.is_object()) throw ValidationError("body", "request body must be a JSON object");
  if (!body.contains("labels")) throw ValidationError("labels", "labels are required");
  SessionMeta meta;
  meta.labels = field_as<std::vector<std::string>>(body, "labels", "a list of strings");
  validate_labels(meta.labels);

  meta.config.seed = body.contains("seed") ? field_as<std::uint64_t>(body, "seed", "a non-negative integer")
                                           : fallback_seed;
  std::string error_mode = "unknown";
  std::optional<double> p;
  if (body.contains("config")) {
    const json& c = body.at("config");
    if (!c.is_object()) throw ValidationError("config", "config must be an object");
    for (const auto& [key, value] : c.items()) {
      if (key == "N") {
        meta.config.ensemble_size = field_as<std::size_t>(c, "N", "a positive integer");
      } else if (key == "epsilon") {
        meta.config.epsilon = field_as<double>(c, "epsilon", "a number");
      } else if (key == "strategy") {
        meta.config.strategy = parse_query_strategy(field_as<std::string>(c, "strategy", "a string"));
      } else if (key == "error_mode") {
        error_mode = field_as<std::string>(c, "error_mode", "a string");
      } else if (key == "p") {
        if (!value.is_null()) p = field_as<double>(c, "p", "a number");
      } else if (key == "warm_start_threshold") {
        meta.config.warm_start_threshold = field_as<std::uint64_t>(c, key.c_str(), "a non-negative integer");
      } else if (key == "max_questions") {
        meta.config.max_questions = field_as<std::uint64_t>(c, key.c_str(), "a positive integer");
      } else {
        throw ValidationError(key, "unknown config field '" + key + "'");
      }
    }
  }
  if (error_mode == "known") {
    if (!p) throw ValidationError("p", "error_mode 'known' needs p");
    meta.model = ErrorModel::known(*p);
  } else if (error_mode == "unknown") {
    if (p) throw ValidationError("p", "p is only allowed with error_mode 'known'");
    meta.model = ErrorModel::unknown();
  } else {
    throw ValidationError("error_mode", "error_mode must be 'known' or 'unknown'");
  }
  meta.config.validate();
  return meta;
}

json SessionMeta::to_json() const {
  json c = {{"N", config.ensemble_size},
            {"epsilon", config.epsilon},
            {"strategy", noisyrank::to_string(config.strategy)},
            {"error_mode", model.is_known() ? "known" : "unknown"}};
  if (model.is_known()) c["p"] = model.p();
  if (config.warm_start_threshold) c["warm_start_threshold"] = *config.warm_start_threshold;
  if (config.max_questions) c["max_questions"] = *config.max_questions;
  return {{"labels", labels}, {"config", c}, {"seed", config.seed}};
}

SessionMeta SessionMeta::from_json(const json& j) { return from_request(j, 0); }

std::string random_session_id() {
  std::random_device rd;
  std::string id;
  char buf[9];
  for (int k = 0; k < 4; ++k) {
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(rd()));
    id += buf;
  }
  return id;
}

// --- Session ----------------------------------------------------------------

Session::Session(std::string id, SessionMeta meta, Engine engine, JournalWriter writer)
    : id_(std::move(id)), meta_(std::move(meta)), engine_(std::move(engine)), writer_(std::move(writer)) {}

std::unique_ptr<Session> Session::create(std::string id, const fs::path& dir, SessionMeta meta) {
  Engine engine(meta.labels.size(), meta.model, meta.config);
  fs::create_directories(dir);
  write_file_synced(dir / kMetaFile, meta.to_json().dump(2) + "\n");
  JournalWriter writer(dir / kJournalFile, meta.labels.size());
  return std::unique_ptr<Session>(new Session(std::move(id), std::move(meta), std::move(engine), std::move(writer)));
}

std::unique_ptr<Session> Session::load(std::string id, const fs::path& dir) {
  std::ifstream in(dir / kMetaFile);
  if (!in) throw NotFoundError("unknown session '" + id + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("corrupt meta.json for session '" + id + "': " + e.what());
  }
  SessionMeta meta = SessionMeta::from_json(j);
  const fs::path journal_path = dir / kJournalFile;
  MeasurementLog log = fs::exists(journal_path) ? load_journal(journal_path) : MeasurementLog(meta.labels.size());
  Engine engine = Engine::replay(meta.labels.size(), meta.model, meta.config, log);
  JournalWriter writer(journal_path, meta.labels.size());
  return std::unique_ptr<Session>(new Session(std::move(id), std::move(meta), std::move(engine), std::move(writer)));
}

RankingResult Session::result_locked() const {
  RankingResult r;
  const auto& c = engine_.convergence();
  for (auto it = c.modal_order.end(); it != c.modal_order.begin();) {
    --it;
    r.ranking.push_back(meta_.labels[*it]);
  }
  r.final = engine_.status() == EngineStatus::Converged;
  r.confidence = c.modal_fraction;
  r.questions_asked = engine_.questions_asked();
  r.status = engine_.status();
  return r;
}

RankingResult Session::result() const {
  std::shared_lock lock(mutex_);
  return result_locked();
}

Question Session::question() const {
  std::shared_lock lock(mutex_);
  const auto& q = engine_.pending();
  if (!q) {
    throw SessionOverError(std::string("session is ") + to_string(engine_.status()), result_locked());
  }
  Question out;
  out.i = q->i;
  out.j = q->j;
  out.label_i = meta_.labels[q->i];
  out.label_j = meta_.labels[q->j];
  out.progress = engine_.convergence().modal_fraction;
  out.questions_asked = engine_.questions_asked();
  out.seq = engine_.questions_asked() + 1;
  return out;
}

EngineStatus Session::answer(ElementId lesser, std::optional<std::uint64_t> seq, const AfterAppendHook& hook) {
  std::unique_lock lock(mutex_);
  if (poisoned_) throw StateError("session state is stale; reload it");
  const std::uint64_t next = engine_.questions_asked() + 1;
  if (seq && *seq != next) {
    throw IdempotencyError("answer for question " + std::to_string(*seq) + " but question " + std::to_string(next) +
                           " is pending");
  }
  const auto& q = engine_.pending();
  if (!q) {
    throw SessionOverError(std::string("session is ") + to_string(engine_.status()), result_locked());
  }
  if (lesser != q->i && lesser != q->j) {
    throw InputError("lesser must be " + std::to_string(q->i) + " or " + std::to_string(q->j));
  }
  const Measurement m{lesser, lesser == q->i ? q->j : q->i, next};
  writer_.append(m);
  if (hook) {
    try {
      hook(id_, m);
    } catch (...) {
      poisoned_ = true;
      throw;
    }
  }
  engine_.submit({m.lesser, m.greater});
  return engine_.status();
}

std::string Session::trace_csv() const {
  std::shared_lock lock(mutex_);
  return format_trace_csv(engine_.trace());
}

std::optional<QueryPair> Session::pending() const {
  std::shared_lock lock(mutex_);
  return engine_.pending();
}

Convergence Session::convergence() const {
  std::shared_lock lock(mutex_);
  return engine_.convergence();
}

MeasurementLog Session::journal() const {
  std::shared_lock lock(mutex_);
  return engine_.log();
}

// --- Store ------------------------------------------------------------------

SessionStore::SessionStore(fs::path data_dir) : data_dir_(std::move(data_dir)) { fs::create_directories(data_dir_); }

std::string SessionStore::create(const json& body) {
  std::random_device rd;
  const std::uint64_t fallback = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  SessionMeta meta = SessionMeta::from_request(body, fallback);
  std::string id;
  do {
    id = random_session_id();
  } while (fs::exists(data_dir_ / id));
  auto session = Session::create(id, data_dir_ / id, std::move(meta));
  std::lock_guard lock(mutex_);
  sessions_[id] = std::move(session);
  return id;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) {
  if (!valid_id(id)) throw NotFoundError("unknown session '" + id + "'");
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it != sessions_.end() && !it->second->poisoned()) return it->second;
  if (!fs::is_directory(data_dir_ / id)) throw NotFoundError("unknown session '" + id + "'");
  std::shared_ptr<Session> s = Session::load(id, data_dir_ / id);
  sessions_[id] = s;
  return s;
}

EngineStatus SessionStore::answer(const std::string& id, ElementId lesser, std::optional<std::uint64_t> seq) {
  auto s = get(id);
  try {
    return s->answer(lesser, seq, hook_);
  } catch (...) {
    if (s->poisoned()) {
      std::lock_guard lock(mutex_);
      auto it = sessions_.find(id);
      if (it != sessions_.end() && it->second == s) sessions_.erase(it);
    }
    throw;
  }
}

// --- HTTP -------------------------------------------------------------------

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& error, const std::string& detail,
                json extra = json::object()) {
  json body = {{"error", error}, {"detail", detail}};
  body.update(extra);
  send_json(res, status, body);
}

json result_json(const RankingResult& r) {
  return {{"ranking", r.ranking},
          {"final", r.final},
          {"confidence", r.confidence},
          {"questions_asked", r.questions_asked},
          {"status", to_string(r.status)}};
}

template <typename Fn>
auto guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ValidationError& e) {
      send_error(res, 400, "validation", e.what(), {{"field", e.field()}});
    } catch (const InputError& e) {
      send_error(res, 400, "validation", e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "validation", e.what());
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const IdempotencyError& e) {
      send_error(res, 409, "duplicate_answer", e.what());
    } catch (const SessionOverError& e) {
      send_error(res, 409, "session_over", e.what(), {{"result", result_json(e.result())}});
    } catch (const StateError& e) {
      send_error(res, 409, "state", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception&) {
    throw ValidationError("body", "request body is not valid JSON");
  }
}

}  // namespace

void mount_routes(httplib::Server& server, SessionStore& store) {
  server.Post("/sessions", guarded([&store](const httplib::Request& req, httplib::Response& res) {
                const std::string id = store.create(parse_body(req));
                send_json(res, 201, {{"id", id}});
              }));

  server.Get(R"(/sessions/([^/]+)/question)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
               const Question q = store.get(req.matches[1])->question();
               send_json(res, 200,
                         {{"i", q.i},
                          {"j", q.j},
                          {"label_i", q.label_i},
                          {"label_j", q.label_j},
                          {"progress", q.progress},
                          {"questions_asked", q.questions_asked},
                          {"seq", q.seq}});
             }));

  server.Post(R"(/sessions/([^/]+)/answer)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                if (!body.is_object() || !body.contains("lesser")) {
                  throw ValidationError("lesser", "lesser is required");
                }
                const auto lesser = field_as<ElementId>(body, "lesser", "an element id");
                std::optional<std::uint64_t> seq;
                if (body.contains("seq")) seq = field_as<std::uint64_t>(body, "seq", "a positive integer");
                const std::string id = req.matches[1];
                const EngineStatus status = store.answer(id, lesser, seq);
                send_json(res, 200,
                          {{"status", to_string(status)}, {"progress", store.get(id)->convergence().modal_fraction}});
              }));

  server.Get(R"(/sessions/([^/]+)/result)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, result_json(store.get(req.matches[1])->result()));
             }));

  server.Get(R"(/sessions/([^/]+)/trace)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
               res.set_content(store.get(req.matches[1])->trace_csv(), "text/csv");
             }));
}

bool serve(SessionStore& store, const std::string& host, int port) {
  httplib::Server server;
  mount_routes(server, store);
  return server.listen(host, port);
}

}  // namespace noisyrank
