// Copyright 2026 The casediag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <fstream>
#include <future>
#include <memory>
#include <string>
#include <thread>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "casediag/error.hpp"
#include "casediag/service.hpp"
#include "demo_world.hpp"

#include <httplib.h>

namespace casediag {
namespace {

using casediag::testing::DemoWorld;

// Delays graph extraction for narratives that mention "slow".
class SlowBackend final : public LlmBackend {
 public:
  explicit SlowBackend(FixtureSet f) : inner_(std::move(f)) {}
  Completion complete(const PromptRequest& r) override {
    if (r.kind == PromptKind::ExtractFactRuleGraph && r.payload.value("text", "").find("slow") != std::string::npos) {
      std::this_thread::sleep_for(std::chrono::milliseconds(600));
    }
    return inner_.complete(r);
  }
  std::string name() const override { return "slow"; }

 private:
  ScriptedMockBackend inner_;
};

class Service : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { world_ = std::make_unique<DemoWorld>(); }
  static void TearDownTestSuite() { world_.reset(); }

  static SessionManager manager(int max_sessions = 16) {
    return SessionManager(world_->loaded(), world_->gateway, max_sessions, kDefaultMaxTurns, 1,
                          [] { return std::int64_t{42}; });
  }
  static std::string open_body() {
    return nlohmann::json{{"narrative", world_->demo().reconstructed_description}, {"case_id", "demo-alibi"}}.dump();
  }
  static std::string answer_body(const std::string& text) { return nlohmann::json{{"text", text}}.dump(); }

  static std::unique_ptr<DemoWorld> world_;
};

std::unique_ptr<DemoWorld> Service::world_;

TEST_F(Service, HealthReadyWithMockGateway) {
  auto m = manager();
  const auto r = handle_request(m, "GET", "/v1/health", "");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["status"], "ready");
  EXPECT_EQ(r.body["gateway"]["backend"], "scripted-mock");
}

TEST_F(Service, WithoutModelsDegradedAnd503) {
  SessionManager m(nullptr, world_->gateway, 4, kDefaultMaxTurns, 1);
  EXPECT_EQ(handle_request(m, "GET", "/v1/health", "").body["status"], "degraded");
  const auto r = handle_request(m, "POST", "/v1/sessions", open_body());
  EXPECT_EQ(r.status, 503);
  EXPECT_EQ(r.body["error"]["code"], "ModelsNotLoaded");
}

TEST_F(Service, LoadModelsReportsMissingCheckpoint) {
  AppConfig cfg;
  cfg.pu_checkpoint = "/nonexistent/pu.json";
  std::string why;
  EXPECT_EQ(load_models(cfg, &why), nullptr);
  EXPECT_NE(why.find("/nonexistent/pu.json"), std::string::npos);
}

TEST_F(Service, OpenAnswerAndSnapshot) {
  auto m = manager();
  const auto created = handle_request(m, "POST", "/v1/sessions", open_body());
  ASSERT_EQ(created.status, 201) << created.body.dump();
  EXPECT_EQ(created.body["turn"], 0);
  EXPECT_EQ(created.body["state"], "AwaitingAnswer");
  EXPECT_TRUE(created.body["question"].is_string());
  const std::string id = created.body["id"];

  const auto answered =
      handle_request(m, "POST", "/v1/sessions/" + id + "/answers",
                     answer_body("Colleagues confirm an alibi placing the accused at work during the incident."));
  ASSERT_EQ(answered.status, 200) << answered.body.dump();
  EXPECT_EQ(answered.body["state"], "Complete");
  EXPECT_EQ(answered.body["verdict"], "Yes");
  EXPECT_TRUE(answered.body["final_view"].is_string());

  const auto snap = handle_request(m, "GET", "/v1/sessions/" + id, "");
  EXPECT_EQ(snap.status, 200);
  EXPECT_EQ(snap.body, answered.body);
  EXPECT_EQ(snap.body["transcript"].size(), 2u);

  const auto again = handle_request(m, "POST", "/v1/sessions/" + id + "/answers", answer_body("more"));
  EXPECT_EQ(again.status, 409);
  EXPECT_EQ(again.body["error"]["code"], "WrongState");
}

TEST_F(Service, ImmediateVerdictHasTurnZeroAndNoQuestion) {
  auto m = manager();
  const auto r = handle_request(m, "POST", "/v1/sessions",
                                nlohmann::json{{"narrative", world_->demo().description}, {"case_id", "demo-alibi"}}.dump());
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(r.body["turn"], 0);
  EXPECT_TRUE(r.body["question"].is_null());
  EXPECT_EQ(r.body["state"], "Complete");
}

TEST_F(Service, BadRequests) {
  auto m = manager();
  for (const std::string body : {"", "{}", "not json", R"({"narrative": 5})", R"({"narrative": ""})",
                                 R"({"narrative": "   "})"}) {
    EXPECT_EQ(handle_request(m, "POST", "/v1/sessions", body).status, 400) << body;
  }
  const std::string too_long(kMaxNarrativeChars + 1, 'a');
  EXPECT_EQ(handle_request(m, "POST", "/v1/sessions", nlohmann::json{{"narrative", too_long}}.dump()).status, 400);
  // Multi-byte characters count once each.
  std::string accented;
  for (std::size_t i = 0; i < kMaxNarrativeChars; ++i) accented += "\xc3\xa9";
  EXPECT_EQ(handle_request(m, "POST", "/v1/sessions", nlohmann::json{{"narrative", accented}}.dump()).status, 201);

  EXPECT_EQ(handle_request(m, "GET", "/v1/sessions/nope", "").status, 404);
  EXPECT_EQ(handle_request(m, "POST", "/v1/sessions/nope/answers", answer_body("x")).status, 404);
  EXPECT_EQ(handle_request(m, "POST", "/v1/sessions", R"({"narrative": "a", "case_id": 3})").status, 400);
  EXPECT_EQ(handle_request(m, "GET", "/v2/health", "").status, 404);
  EXPECT_EQ(handle_request(m, "DELETE", "/v1/sessions", "").status, 405);

  const auto id = handle_request(m, "POST", "/v1/sessions", open_body()).body["id"].get<std::string>();
  EXPECT_EQ(handle_request(m, "POST", "/v1/sessions/" + id + "/answers", "{}").status, 400);
  EXPECT_EQ(handle_request(m, "POST", "/v1/sessions/" + id + "/answers", answer_body(" ")).status, 400);
  EXPECT_EQ(m.get(id).state, SessionState::AwaitingAnswer);
}

TEST_F(Service, CapacityEvictsFinishedSessionsOnly) {
  auto m = manager(2);
  const auto a = m.create(world_->demo().reconstructed_description, "demo-alibi");
  m.create(world_->demo().reconstructed_description, "demo-alibi");
  const auto full = handle_request(m, "POST", "/v1/sessions", open_body());
  EXPECT_EQ(full.status, 503);
  m.answer(a.id, "Colleagues confirm an alibi placing the accused at work.");
  ASSERT_EQ(m.get(a.id).state, SessionState::Complete);
  EXPECT_EQ(handle_request(m, "POST", "/v1/sessions", open_body()).status, 201);
  EXPECT_EQ(m.size(), 2u);
  EXPECT_THROW(m.get(a.id), Error);
}

TEST_F(Service, SessionsDoNotBlockEachOther) {
  auto fixtures = world_->bundle.fixtures;
  auto gw = std::make_shared<const LlmGateway>(GatewayConfig{}, std::make_shared<SlowBackend>(fixtures));
  SessionManager m(world_->loaded(), gw, 8, kDefaultMaxTurns, 1);
  const auto fast = m.create(world_->demo().reconstructed_description);
  auto slow = std::async(std::launch::async, [&] {
    return m.create("slow narrative: " + world_->demo().reconstructed_description);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(m.get(fast.id).id, fast.id);
  m.answer(fast.id, "I don't know");
  const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(ms, 400.0);
  EXPECT_EQ(slow.get().state, SessionState::AwaitingAnswer);
}

TEST_F(Service, ConcurrentAnswersOnOneSessionSerialize) {
  auto m = manager();
  const auto s = m.create(world_->demo().reconstructed_description);
  std::vector<std::future<int>> results;
  for (int i = 0; i < 4; ++i) {
    results.push_back(std::async(std::launch::async, [&] {
      return handle_request(m, "POST", "/v1/sessions/" + s.id + "/answers", answer_body("I don't know")).status;
    }));
  }
  int ok = 0;
  for (auto& r : results) {
    const int status = r.get();
    EXPECT_TRUE(status == 200 || status == 409) << status;
    ok += status == 200;
  }
  const auto final = m.get(s.id);
  EXPECT_EQ(static_cast<int>(final.confirmed.size()), ok);
  EXPECT_EQ(final.transcript.size(), final.question_count() + final.confirmed.size());
}

TEST_F(Service, EnvelopeMatchesSchemaKeys) {
  std::ifstream in(std::string(CASEDIAG_SOURCE_DIR) + "/schemas/session_envelope.schema.json");
  ASSERT_TRUE(in);
  const auto schema = nlohmann::json::parse(in);
  auto m = manager();
  const auto s = m.create(world_->demo().reconstructed_description);
  const auto env = session_envelope(s);
  EXPECT_EQ(nlohmann::json::parse(env.dump()), env);
  std::set<std::string> keys;
  for (const auto& [k, v] : env.items()) keys.insert(k);
  std::set<std::string> declared;
  for (const auto& [k, v] : schema["properties"].items()) declared.insert(k);
  EXPECT_EQ(keys, declared);
  for (const auto& k : schema["required"]) EXPECT_TRUE(env.contains(k.get<std::string>()));
  EXPECT_FALSE(env.contains("bandit_id"));
  EXPECT_FALSE(env.contains("pending_node"));
}

TEST_F(Service, OverHttp) {
  auto m = manager();
  HttpService http(m);
  const int port = http.bind("127.0.0.1", 0);
  std::thread server([&] { http.listen(); });
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 50 && !client.Get("/v1/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));

  const auto health = client.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  const auto created = client.Post("/v1/sessions", open_body(), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const auto env = nlohmann::json::parse(created->body);
  const auto answered = client.Post("/v1/sessions/" + env["id"].get<std::string>() + "/answers",
                                    answer_body("I don't know"), "application/json");
  ASSERT_TRUE(answered);
  EXPECT_EQ(answered->status, 200);
  const auto missing = client.Get("/v1/sessions/unknown");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(nlohmann::json::parse(missing->body)["error"]["code"], "UnknownSession");

  http.stop();
  server.join();
}

}  // namespace
}  // namespace casediag
