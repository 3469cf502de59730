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

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "casediag/app_config.hpp"
#include "casediag/session.hpp"

namespace casediag {

inline constexpr std::size_t kMaxNarrativeChars = 16384;

/// Read-only models behind every session of a service.
struct LoadedModels {
  FactRuleGraph global_graph;
  PuModel pu;
  BanditArchive bandits;
  std::unique_ptr<EmbeddingProvider> embedder;
  int n_hop = 2;
};

/// Loads the scorer and bandit checkpoints and the corpus global graph.
/// Returns nullptr and sets `why` when any of them is missing or unreadable.
std::shared_ptr<const LoadedModels> load_models(const AppConfig& cfg, std::string* why = nullptr);

/// Gateway of the configured backend. The scripted mock falls back to
/// <corpus>/fixtures.jsonl when no fixture file is configured.
std::shared_ptr<const LlmGateway> make_gateway(const AppConfig& cfg);

/// Observable session state: id, state, turn, current question, final view,
/// transcript. Model internals stay out.
nlohmann::json session_envelope(const DialogueSession& s);

/// In-memory session store. Requests on one session run one at a time;
/// snapshots and other sessions never wait on a running deliberation.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<const LoadedModels> models, std::shared_ptr<const LlmGateway> gateway,
                 int max_sessions, int max_turns, std::uint64_t seed, std::function<std::int64_t()> clock = {});

  bool ready() const { return models_ != nullptr; }
  /// Throws BackendUnavailable without models, EmptyText / InvalidArgument
  /// for a bad narrative and OutOfRange when every slot holds a live session.
  DialogueSession create(std::string narrative, std::optional<std::string> case_id = std::nullopt);
  /// Throws UnknownSession or WrongState.
  DialogueSession answer(const std::string& id, std::string text);
  DialogueSession get(const std::string& id) const;
  std::size_t size() const;
  nlohmann::json health() const;

 private:
  struct Slot {
    std::mutex work;  // serializes deliberations of this session
    mutable std::mutex snap;
    DialogueSession snapshot;
    std::uint64_t order = 0;
  };
  std::shared_ptr<Slot> slot(const std::string& id) const;
  SessionModels session_models() const;
  void reserve();

  std::shared_ptr<const LoadedModels> models_;
  std::shared_ptr<const LlmGateway> gateway_;
  int max_sessions_;
  int max_turns_;
  std::uint64_t seed_;
  std::function<std::int64_t()> clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t counter_ = 0;
  int pending_ = 0;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Routes one request of the session API. POST /v1/sessions takes
/// {"narrative", optional "case_id"}. Error bodies are
/// {"error": {"code", "message"}}.
ApiResponse handle_request(SessionManager& manager, std::string_view method, std::string_view path,
                           std::string_view body);

/// HTTP front end over handle_request.
class HttpService {
 public:
  explicit HttpService(SessionManager& manager);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); in-flight requests finish first.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace casediag
