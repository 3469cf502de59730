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

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "casediag/error.hpp"
#include "casediag/gateway.hpp"
#include "casediag/text.hpp"

// httplib pulls in <resolv.h>, whose macros clash with Eigen; keep it last.
#include <httplib.h>

namespace casediag {

namespace {

bool mentions(const std::vector<std::string>& tokens, const std::string& phrase) {
  return text::contains_phrase(tokens, phrase);
}

std::string mock_reconstruct(const nlohmann::json& payload) {
  const auto aspects = payload.value("aspects", std::vector<std::string>{});
  std::vector<std::string> kept;
  for (const auto& sentence : text::split_sentences(payload.value("text", std::string{}))) {
    const auto tokens = text::tokenize(sentence);
    const bool drop = std::any_of(aspects.begin(), aspects.end(), [&](const auto& a) { return mentions(tokens, a); });
    if (!drop) kept.push_back(sentence);
  }
  return text::join(kept, " ");
}

std::string mock_answer_and_score(const nlohmann::json& payload) {
  const auto view_tokens = text::tokenize(payload.value("view", std::string{}));
  const std::set<std::string> vocabulary(view_tokens.begin(), view_tokens.end());
  int correct = 0;
  for (const auto& qa : payload.at("questions")) {
    const auto keys = key_tokens(qa.at("answer").get<std::string>());
    if (!keys.empty() && std::all_of(keys.begin(), keys.end(), [&](const auto& k) { return vocabulary.contains(k); })) {
      ++correct;
    }
  }
  return "Final score: " + std::to_string(correct);
}

std::string templated_view(const std::vector<std::string>& confirmed) {
  std::string view = "The information provided is not yet sufficient for the court to reach a conclusion.";
  if (!confirmed.empty()) view += " Facts confirmed so far: " + text::join(confirmed, "; ") + ".";
  return view;
}

}  // namespace

ScriptedMockBackend::ScriptedMockBackend(FixtureSet fixtures) : fixtures_(std::move(fixtures)) {
  std::vector<FactRuleGraph> graphs;
  for (const auto& [key, response] : fixtures_.rows()) {
    if (key.kind != PromptKind::ExtractFactRuleGraph) continue;
    try {
      graphs.push_back(parse_graph(response));
    } catch (const Error&) {
      // Deliberately malformed fixtures stay out of the vocabulary.
    }
  }
  vocabulary_ = merge(graphs);
}

Completion ScriptedMockBackend::complete(const PromptRequest& request) {
  if (const auto* hit = fixtures_.find({request.kind, request.case_id, request.discriminator})) return {*hit, false};
  const auto& p = request.payload;
  switch (request.kind) {
    case PromptKind::ExtractFactRuleGraph: {
      const auto tokens = text::tokenize(p.value("text", std::string{}));
      std::set<NodeId> keep;
      for (const auto& n : vocabulary_.nodes()) {
        if (n.kind == NodeKind::Fact && mentions(tokens, n.label)) keep.insert(n);
      }
      for (const auto& e : vocabulary_.edges()) {
        if (e.target.kind == NodeKind::Rule && keep.contains(e.source)) keep.insert(e.target);
      }
      auto g = vocabulary_.induced(keep);
      g.set_case_id(request.case_id);
      return {serialize(g), false};
    }
    case PromptKind::ReconstructCase:
      return {mock_reconstruct(p), false};
    case PromptKind::AnswerAndScore:
      return {mock_answer_and_score(p), false};
    case PromptKind::NodeToQuestion:
      return {"Regarding your case: can you tell me more about " + p.value("label", std::string{}) + "? For example, " +
                  p.value("hint", std::string{}) + ".",
              false};
    case PromptKind::GenerateCourtView: {
      const auto confirmed = p.value("confirmed", std::vector<std::string>{});
      const auto* rule = fixtures_.find({request.kind, request.case_id, "*"});
      if (rule == nullptr) return {templated_view(confirmed) + " " + render_stop_token(Verdict::No), true};
      const auto spec = nlohmann::json::parse(*rule);
      const std::set<std::string> have(confirmed.begin(), confirmed.end());
      const auto tokens = text::tokenize(p.value("text", std::string{}));
      const auto required = spec.value("required", std::vector<std::string>{});
      const bool complete = std::all_of(required.begin(), required.end(), [&](const auto& label) {
        return have.contains(label) || mentions(tokens, label);
      });
      if (complete) return {spec.at("view").get<std::string>() + " " + render_stop_token(Verdict::Yes), false};
      return {templated_view(confirmed) + " " + render_stop_token(Verdict::No), false};
    }
    default:
      throw Error(Errc::BackendUnavailable, "scripted mock has no fixture for " + std::string(to_string(request.kind)) +
                                                " / case '" + request.case_id + "'");
  }
}

FixtureSet FixtureSet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open fixture file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_jsonl(buf.str());
}

struct HttpLlmBackend::Limiter {
  std::mutex mu;
  std::condition_variable cv;
  int available = 0;
};

HttpLlmBackend::HttpLlmBackend(GatewayConfig cfg) : cfg_(std::move(cfg)), limiter_(std::make_unique<Limiter>()) {
  cfg_.validate();
  limiter_->available = cfg_.max_concurrency;
}

HttpLlmBackend::~HttpLlmBackend() = default;

Completion HttpLlmBackend::complete(const PromptRequest& request) {
  {
    std::unique_lock lock(limiter_->mu);
    limiter_->cv.wait(lock, [&] { return limiter_->available > 0; });
    --limiter_->available;
  }
  struct Release {
    Limiter& l;
    ~Release() {
      {
        std::lock_guard lock(l.mu);
        ++l.available;
      }
      l.cv.notify_one();
    }
  } release{*limiter_};

  httplib::Client client(cfg_.base_url);
  client.set_connection_timeout(cfg_.timeout_seconds, 0);
  client.set_read_timeout(cfg_.timeout_seconds, 0);
  httplib::Headers headers;
  if (const char* token = std::getenv(cfg_.token_env.c_str()); token != nullptr && *token != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const nlohmann::json body = {{"prompt", request.prompt},
                               {"temperature", cfg_.temperature},
                               {"top_p", cfg_.top_p},
                               {"max_tokens", cfg_.max_tokens}};
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 << (attempt - 1)));
    auto res = client.Post("/v1/complete", headers, body.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(Errc::BackendUnavailable, "LLM endpoint returned HTTP " + std::to_string(res->status) + " for " +
                                                std::string(to_string(request.kind)) + " / case '" + request.case_id + "'");
    }
    try {
      return {nlohmann::json::parse(res->body).at("text").get<std::string>(), false};
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ResponseParseError, std::string("LLM endpoint reply is not {\"text\": ...}: ") + e.what());
    }
  }
  throw Error(Errc::BackendUnavailable, "LLM endpoint unreachable after " + std::to_string(cfg_.max_retries + 1) +
                                            " attempts (" + last_error + ") for " + std::string(to_string(request.kind)) +
                                            " / case '" + request.case_id + "'");
}

bool HttpLlmBackend::healthy() const {
  httplib::Client client(cfg_.base_url);
  client.set_connection_timeout(2, 0);
  client.set_read_timeout(2, 0);
  auto res = client.Get("/v1/health");
  return res && res->status == 200;
}

std::shared_ptr<LlmBackend> make_backend(const GatewayConfig& cfg) {
  cfg.validate();
  if (cfg.backend == "http") return std::make_shared<HttpLlmBackend>(cfg);
  return std::make_shared<ScriptedMockBackend>(cfg.fixtures.empty() ? FixtureSet{} : FixtureSet::load(cfg.fixtures));
}

}  // namespace casediag
