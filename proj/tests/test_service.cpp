#include <gtest/gtest.h>

#include <httplib.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "noisyrank/service.hpp"
#include "test_util.hpp"

namespace noisyrank {
namespace {

using nlohmann::json;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json body(std::vector<std::string> labels, std::uint64_t seed = 1, json config = json::object()) {
  return {{"labels", labels}, {"seed", seed}, {"config", config}};
}

// Answers by a fixed preference: the label appearing later in `liked` wins.
ElementId lesser_for(const Question& q, const std::vector<std::string>& liked) {
  const auto rank = [&](const std::string& l) { return std::find(liked.begin(), liked.end(), l) - liked.begin(); };
  return rank(q.label_i) < rank(q.label_j) ? q.i : q.j;
}

TEST(SessionMeta, ParsesAndRoundTrips) {
  const auto m = SessionMeta::from_request(
      body({"a", "b", "c"}, 4, {{"N", 50}, {"epsilon", 0.05}, {"error_mode", "known"}, {"p", 0.9}}), 0);
  EXPECT_EQ(m.config.ensemble_size, 50u);
  EXPECT_EQ(m.config.seed, 4u);
  EXPECT_TRUE(m.model.is_known());
  EXPECT_EQ(SessionMeta::from_json(m.to_json()).to_json(), m.to_json());
  EXPECT_EQ(SessionMeta::from_request({{"labels", {"x", "y"}}}, 77).config.seed, 77u);
}

TEST(SessionMeta, RejectsBadRequests) {
  const auto field_of = [](const json& b) {
    try {
      SessionMeta::from_request(b, 0);
    } catch (const ValidationError& e) {
      return e.field();
    }
    return std::string("none");
  };
  EXPECT_EQ(field_of({{"labels", {"a"}}}), "labels");
  EXPECT_EQ(field_of({{"labels", {"a", "a"}}}), "labels");
  EXPECT_EQ(field_of({{"labels", {"a", ""}}}), "labels");
  EXPECT_EQ(field_of(json::object()), "labels");
  EXPECT_EQ(field_of(body({"a", "b"}, 1, {{"colour", 1}})), "colour");
  EXPECT_EQ(field_of(body({"a", "b"}, 1, {{"error_mode", "known"}})), "p");
  EXPECT_EQ(field_of(body({"a", "b"}, 1, {{"p", 0.9}})), "p");
  EXPECT_EQ(field_of(body({"a", "b"}, 1, {{"error_mode", "known"}, {"p", 0.5}})), "p");
  EXPECT_EQ(field_of(body({"a", "b"}, 1, {{"epsilon", 2}})), "epsilon");
  EXPECT_EQ(field_of(body({"a", "b"}, 1, {{"strategy", "zigzag"}})), "strategy");
  EXPECT_EQ(field_of(json::array()), "body");
}

TEST(SessionId, HexAndUnique) {
  const std::string a = random_session_id();
  EXPECT_EQ(a.size(), 32u);
  EXPECT_EQ(a.find_first_not_of("0123456789abcdef"), std::string::npos);
  EXPECT_NE(a, random_session_id());
}

TEST(Session, TwoLabelsAskImmediately) {
  test::TempDir dir;
  SessionStore store(dir.path());
  const std::string id = store.create(body({"tea", "coffee"}));
  auto s = store.get(id);
  const Question q = s->question();
  EXPECT_EQ(q.questions_asked, 0u);
  EXPECT_EQ(q.seq, 1u);
  EXPECT_NE(q.label_i, q.label_j);
  EXPECT_EQ(s->result().status, EngineStatus::AwaitingAnswer);
}

TEST(Session, QuestionIsIdempotentAndSurvivesReload) {
  test::TempDir dir;
  const std::string id = [&] {
    SessionStore store(dir.path());
    const std::string id = store.create(body({"a", "b", "c", "d", "e"}, 3));
    auto s = store.get(id);
    const Question q = s->question();
    store.answer(id, q.i, q.seq);
    return id;
  }();
  SessionStore fresh(dir.path());
  auto s = fresh.get(id);
  const Question q1 = s->question();
  const Question q2 = s->question();
  EXPECT_EQ(q1.seq, 2u);
  EXPECT_EQ(q1.i, q2.i);
  EXPECT_EQ(q1.j, q2.j);
  EXPECT_DOUBLE_EQ(q1.progress, s->convergence().modal_fraction);

  // Reload again and compare with the first reload.
  auto again = Session::load(id, dir.path() / id);
  EXPECT_EQ(again->question().i, q1.i);
  EXPECT_EQ(again->question().j, q1.j);
}

TEST(Session, RejectsElementOutsidePairWithoutJournalling) {
  test::TempDir dir;
  SessionStore store(dir.path());
  const std::string id = store.create(body({"a", "b", "c", "d"}, 5));
  auto s = store.get(id);
  const Question q = s->question();
  ElementId other = 0;
  while (other == q.i || other == q.j) ++other;
  const std::string before = slurp(dir.path() / id / "journal");
  EXPECT_THROW(store.answer(id, other, q.seq), InputError);
  EXPECT_EQ(slurp(dir.path() / id / "journal"), before);
  EXPECT_EQ(s->journal().size(), 0u);
}

TEST(Session, DuplicateSubmitIsRejected) {
  test::TempDir dir;
  SessionStore store(dir.path());
  const std::string id = store.create(body({"a", "b", "c", "d"}, 6));
  const Question q = store.get(id)->question();
  store.answer(id, q.j, q.seq);
  EXPECT_THROW(store.answer(id, q.j, q.seq), IdempotencyError);
  EXPECT_EQ(store.get(id)->journal().size(), 1u);
}

TEST(Session, JournalMatchesEngineLog) {
  test::TempDir dir;
  SessionStore store(dir.path());
  const std::vector<std::string> liked{"e", "a", "d", "b", "c"};
  const std::string id = store.create(body({"a", "b", "c", "d", "e"}, 7));
  for (int k = 0; k < 12; ++k) {
    const Question q = store.get(id)->question();
    store.answer(id, lesser_for(q, liked), std::nullopt);
  }
  EXPECT_EQ(format_journal(load_journal(dir.path() / id / "journal")), format_journal(store.get(id)->journal()));
}

TEST(Session, CrashAfterAppendRecoversFromJournal) {
  test::TempDir dir;
  SessionStore store(dir.path());
  const std::vector<std::string> liked{"c", "f", "a", "e", "b", "d"};
  const std::string id = store.create(body({"a", "b", "c", "d", "e", "f"}, 8));
  bool crash = false;
  store.set_after_append_hook([&](const std::string&, const Measurement& m) {
    if (crash && m.sequence_number == 4) throw std::runtime_error("simulated crash");
  });
  for (int k = 0; k < 3; ++k) {
    const Question q = store.get(id)->question();
    store.answer(id, lesser_for(q, liked), q.seq);
  }
  crash = true;
  const Question q = store.get(id)->question();
  EXPECT_THROW(store.answer(id, lesser_for(q, liked), q.seq), std::runtime_error);

  auto reloaded = store.get(id);
  EXPECT_FALSE(reloaded->poisoned());
  EXPECT_EQ(reloaded->journal().size(), 4u);
  auto reference = Session::load(id, dir.path() / id);
  EXPECT_EQ(reloaded->pending(), reference->pending());
  EXPECT_EQ(reloaded->trace_csv(), reference->trace_csv());
  EXPECT_EQ(reloaded->question().seq, 5u);
  EXPECT_THROW(store.answer(id, lesser_for(reloaded->question(), liked), 4), IdempotencyError);
}

TEST(Session, ResultStabilisesAfterConvergence) {
  test::TempDir dir;
  SessionStore store(dir.path());
  const std::vector<std::string> liked{"b", "d", "a", "c"};
  const std::string id = store.create(body({"a", "b", "c", "d"}, 9, {{"error_mode", "known"}, {"p", 0.99}}));
  auto s = store.get(id);
  const Question q0 = s->question();
  store.answer(id, lesser_for(q0, liked), q0.seq);
  EXPECT_FALSE(s->result().final);
  for (int k = 0; k < 500 && s->result().status == EngineStatus::AwaitingAnswer; ++k) {
    const Question q = s->question();
    store.answer(id, lesser_for(q, liked), q.seq);
  }
  const RankingResult r = s->result();
  ASSERT_TRUE(r.final);
  EXPECT_EQ(r.status, EngineStatus::Converged);
  EXPECT_GT(r.confidence, 0.99);
  EXPECT_EQ(r.ranking, (std::vector<std::string>{"c", "a", "d", "b"}));

  // Ranking is the modal order read from most to least preferred.
  const Convergence conv = s->convergence();
  const auto modal = conv.modal_order.elements();
  std::vector<std::string> reversed;
  for (auto it = modal.rbegin(); it != modal.rend(); ++it) reversed.push_back(s->meta().labels[*it]);
  EXPECT_EQ(r.ranking, reversed);

  EXPECT_THROW(s->question(), SessionOverError);
  try {
    store.answer(id, 0, std::nullopt);
    FAIL();
  } catch (const SessionOverError& e) {
    EXPECT_EQ(e.result().ranking, r.ranking);
  }
  EXPECT_EQ(s->result().ranking, r.ranking);
}

TEST(SessionStore, UnknownIds) {
  test::TempDir dir;
  SessionStore store(dir.path());
  EXPECT_THROW(store.get("0123456789abcdef0123456789abcdef"), NotFoundError);
  EXPECT_THROW(store.get("../etc"), NotFoundError);
  EXPECT_THROW(store.get(""), NotFoundError);
}

class Http : public ::testing::Test {
 protected:
  void SetUp() override {
    store_ = std::make_unique<SessionStore>(dir_.path());
    mount_routes(server_, *store_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  httplib::Result post(const std::string& path, const json& b) {
    return client_->Post(path, b.dump(), "application/json");
  }

  test::TempDir dir_;
  std::unique_ptr<SessionStore> store_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(Http, FullSessionFlow) {
  auto created = post("/sessions", body({"x", "y", "z"}, 2, {{"error_mode", "known"}, {"p", 0.95}}));
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201);
  const std::string id = json::parse(created->body).at("id");
  const std::string base = "/sessions/" + id;

  const std::vector<std::string> liked{"y", "z", "x"};
  std::string status = "awaiting_answer";
  int asked = 0;
  while (status == "awaiting_answer" && asked < 200) {
    auto qr = client_->Get(base + "/question");
    ASSERT_EQ(qr->status, 200);
    const json q = json::parse(qr->body);
    const Question question{q.at("i"), q.at("j"), q.at("label_i"), q.at("label_j")};
    auto ar = post(base + "/answer", {{"lesser", lesser_for(question, liked)}, {"seq", q.at("seq")}});
    ASSERT_EQ(ar->status, 200) << ar->body;
    const json a = json::parse(ar->body);
    status = a.at("status");
    EXPECT_GE(a.at("progress").get<double>(), 0.0);
    ++asked;
  }
  auto rr = client_->Get(base + "/result");
  ASSERT_EQ(rr->status, 200);
  const json r = json::parse(rr->body);
  EXPECT_TRUE(r.at("final").get<bool>());
  EXPECT_EQ(r.at("ranking"), json({"x", "z", "y"}));
  EXPECT_EQ(r.at("questions_asked"), asked);

  auto over = client_->Get(base + "/question");
  EXPECT_EQ(over->status, 409);
  EXPECT_EQ(json::parse(over->body).at("error"), "session_over");
  EXPECT_EQ(json::parse(over->body).at("result").at("ranking"), r.at("ranking"));

  auto tr = client_->Get(base + "/trace");
  ASSERT_EQ(tr->status, 200);
  EXPECT_EQ(tr->get_header_value("Content-Type"), "text/csv");
  EXPECT_EQ(tr->body.rfind("q_index,i,j,response,modal_fraction,middle_partition_len_mean\n", 0), 0u);
  EXPECT_EQ(std::count(tr->body.begin(), tr->body.end(), '\n'), asked + 1);
}

TEST_F(Http, ErrorStatuses) {
  auto bad = post("/sessions", {{"labels", {"only"}}});
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body).at("error"), "validation");
  EXPECT_EQ(json::parse(bad->body).at("field"), "labels");

  auto junk = client_->Post("/sessions", "{not json", "application/json");
  EXPECT_EQ(junk->status, 400);

  EXPECT_EQ(client_->Get("/sessions/ffffffffffffffffffffffffffffffff/question")->status, 404);
  EXPECT_EQ(client_->Get("/sessions/nothex/result")->status, 404);

  const std::string id = json::parse(post("/sessions", body({"a", "b", "c"}))->body).at("id");
  const std::string base = "/sessions/" + id;
  const json q = json::parse(client_->Get(base + "/question")->body);
  ElementId other = 0;
  while (other == q.at("i") || other == q.at("j")) ++other;
  auto outside = post(base + "/answer", {{"lesser", other}});
  EXPECT_EQ(outside->status, 400);
  EXPECT_EQ(post(base + "/answer", json::object())->status, 400);
  EXPECT_EQ(post(base + "/answer", {{"lesser", "a"}})->status, 400);

  EXPECT_EQ(post(base + "/answer", {{"lesser", q.at("i")}, {"seq", q.at("seq")}})->status, 200);
  auto dup = post(base + "/answer", {{"lesser", q.at("i")}, {"seq", q.at("seq")}});
  EXPECT_EQ(dup->status, 409);
  EXPECT_EQ(json::parse(dup->body).at("error"), "duplicate_answer");
}

}  // namespace
}  // namespace noisyrank
