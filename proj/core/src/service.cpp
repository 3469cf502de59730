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

#include "casediag/service.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>

#include "casediag/error.hpp"
#include "casediag/rng.hpp"
#include "casediag/text.hpp"

// Eigen (through service.hpp) must precede httplib.
#include <httplib.h>

namespace casediag {
namespace {

namespace fs = std::filesystem;

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (const unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
  return {status, {{"error", {{"code", code}, {"message", message}}}}};
}

int status_for(Errc code) {
  switch (code) {
    case Errc::EmptyText:
    case Errc::InvalidArgument:
      return 400;
    case Errc::UnknownSession:
      return 404;
    case Errc::WrongState:
      return 409;
    case Errc::BackendUnavailable:
    case Errc::OutOfRange:
      return 503;
    default:
      return 500;
  }
}

}  // namespace

std::shared_ptr<const LoadedModels> load_models(const AppConfig& cfg, std::string* why) {
  try {
    auto m = std::make_shared<LoadedModels>();
    m->pu = PuModel::from_json(nlohmann::json::parse(read_file(cfg.pu_checkpoint)));
    m->bandits = BanditArchive::from_json(nlohmann::json::parse(read_file(cfg.bandit_checkpoint)));
    m->global_graph = parse_graph(read_file(fs::path(cfg.corpus_dir) / "global_graph.json"));
    m->embedder = make_embedding_provider(cfg.embedding);
    m->n_hop = cfg.session_n_hop;
    if (m->embedder->dim() != m->pu.architecture().dim) {
      throw Error(Errc::DimensionMismatch, "embedding dim " + std::to_string(m->embedder->dim()) +
                                               " differs from checkpoint dim " +
                                               std::to_string(m->pu.architecture().dim));
    }
    return m;
  } catch (const std::exception& e) {
    if (why != nullptr) *why = e.what();
    return nullptr;
  }
}

std::shared_ptr<const LlmGateway> make_gateway(const AppConfig& cfg) {
  GatewayConfig g = cfg.gateway;
  if (g.backend == "scripted-mock" && g.fixtures.empty()) {
    const auto fallback = fs::path(cfg.corpus_dir) / "fixtures.jsonl";
    if (fs::exists(fallback)) g.fixtures = fallback.string();
  }
  return std::make_shared<const LlmGateway>(g, make_backend(g));
}

nlohmann::json session_envelope(const DialogueSession& s) {
  nlohmann::json transcript = nlohmann::json::array();
  for (const auto& t : s.transcript) {
    transcript.push_back({{"role", t.role}, {"text", t.text}, {"timestamp_ms", t.timestamp_ms}});
  }
  const bool complete = s.state == SessionState::Complete;
  nlohmann::json j;
  j["id"] = s.id;
  j["state"] = to_string(s.state);
  j["turn"] = s.turn;
  j["max_turns"] = s.max_turns;
  j["question"] = s.state == SessionState::AwaitingAnswer ? nlohmann::json(s.pending_question) : nlohmann::json();
  j["final_view"] = complete ? nlohmann::json(s.draft_view) : nlohmann::json();
  j["verdict"] = complete && s.verdict ? nlohmann::json(to_string(*s.verdict)) : nlohmann::json();
  j["forced_complete"] = s.forced_complete;
  j["degraded"] = s.degraded;
  j["error"] = s.state == SessionState::Aborted ? nlohmann::json(s.abort_cause) : nlohmann::json();
  j["transcript"] = std::move(transcript);
  return j;
}

SessionManager::SessionManager(std::shared_ptr<const LoadedModels> models, std::shared_ptr<const LlmGateway> gateway,
                               int max_sessions, int max_turns, std::uint64_t seed,
                               std::function<std::int64_t()> clock)
    : models_(std::move(models)),
      gateway_(std::move(gateway)),
      max_sessions_(max_sessions),
      max_turns_(max_turns),
      seed_(seed),
      clock_(std::move(clock)) {
  if (gateway_ == nullptr) throw Error(Errc::InvalidArgument, "session manager needs a gateway");
  if (max_sessions_ < 1 || max_turns_ < 1) throw Error(Errc::InvalidArgument, "limits must be positive");
}

SessionModels SessionManager::session_models() const {
  return {&models_->pu, &models_->bandits, models_->embedder.get(), &models_->global_graph, models_->n_hop, clock_};
}

// Makes room for one more session: finished sessions are evicted oldest
// first; live ones are never dropped.
void SessionManager::reserve() {
  std::lock_guard lock(mu_);
  while (static_cast<int>(sessions_.size()) + pending_ >= max_sessions_) {
    std::string victim;
    std::uint64_t oldest = UINT64_MAX;
    for (const auto& [id, slot] : sessions_) {
      std::lock_guard snap(slot->snap);
      const auto st = slot->snapshot.state;
      if ((st == SessionState::Complete || st == SessionState::Aborted) && slot->order < oldest) {
        oldest = slot->order;
        victim = id;
      }
    }
    if (victim.empty()) throw Error(Errc::OutOfRange, "session limit of " + std::to_string(max_sessions_) + " reached");
    sessions_.erase(victim);
  }
  ++pending_;
}

DialogueSession SessionManager::create(std::string narrative, std::optional<std::string> case_id) {
  if (!ready()) throw Error(Errc::BackendUnavailable, "models are not loaded");
  if (text::trim(narrative).empty()) throw Error(Errc::EmptyText, "narrative is empty");
  if (case_id && text::trim(*case_id).empty()) throw Error(Errc::InvalidArgument, "case_id is empty");
  if (utf8_length(narrative) > kMaxNarrativeChars) {
    throw Error(Errc::InvalidArgument, "narrative exceeds " + std::to_string(kMaxNarrativeChars) + " characters");
  }
  reserve();
  std::string id;
  std::uint64_t order = 0;
  {
    std::lock_guard lock(mu_);
    do {
      order = ++counter_;
      char buf[18];
      std::snprintf(buf, sizeof(buf), "s%016llx", static_cast<unsigned long long>(mix_seed(seed_, order)));
      id = buf;
    } while (sessions_.contains(id));
  }
  auto slot = std::make_shared<Slot>();
  slot->order = order;
  try {
    slot->snapshot = open_session(id, std::move(narrative), std::move(case_id), session_models(), *gateway_, max_turns_);
  } catch (...) {
    std::lock_guard lock(mu_);
    --pending_;
    throw;
  }
  std::lock_guard lock(mu_);
  --pending_;
  sessions_[id] = slot;
  return slot->snapshot;
}

std::shared_ptr<SessionManager::Slot> SessionManager::slot(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(Errc::UnknownSession, "no session '" + id + "'");
  return it->second;
}

DialogueSession SessionManager::answer(const std::string& id, std::string text) {
  auto s = slot(id);
  std::lock_guard work(s->work);
  DialogueSession current;
  {
    std::lock_guard snap(s->snap);
    current = s->snapshot;
  }
  auto next = submit_answer(std::move(current), std::move(text), session_models(), *gateway_);
  std::lock_guard snap(s->snap);
  s->snapshot = next;
  return next;
}

DialogueSession SessionManager::get(const std::string& id) const {
  auto s = slot(id);
  std::lock_guard snap(s->snap);
  return s->snapshot;
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

nlohmann::json SessionManager::health() const {
  const bool gateway_ok = gateway_->backend().healthy();
  return {{"status", ready() && gateway_ok ? "ready" : "degraded"},
          {"models_loaded", ready()},
          {"gateway", {{"backend", gateway_->backend().name()}, {"healthy", gateway_ok}}},
          {"sessions", size()}};
}

ApiResponse handle_request(SessionManager& manager, std::string_view method, std::string_view path,
                           std::string_view body) {
  const auto parts = [&] {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < path.size()) {
      const auto slash = path.find('/', pos);
      const auto end = slash == std::string_view::npos ? path.size() : slash;
      if (end > pos) out.emplace_back(path.substr(pos, end - pos));
      pos = end + 1;
    }
    return out;
  }();
  const auto parse_body = [&](const char* field) -> std::optional<std::string> {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains(field) || !j[field].is_string()) return std::nullopt;
    return j[field].get<std::string>();
  };
  try {
    if (parts.size() < 2 || parts[0] != "v1") return error_response(404, "NotFound", "no route");
    if (parts.size() == 2 && parts[1] == "health") {
      if (method != "GET") return error_response(405, "MethodNotAllowed", "use GET");
      return {200, manager.health()};
    }
    if (parts[1] != "sessions") return error_response(404, "NotFound", "no route");
    if (parts.size() == 2) {
      if (method != "POST") return error_response(405, "MethodNotAllowed", "use POST");
      if (!manager.ready()) return error_response(503, "ModelsNotLoaded", "models are not loaded");
      const auto narrative = parse_body("narrative");
      if (!narrative) return error_response(400, "InvalidBody", "expected {\"narrative\": string}");
      const auto j = nlohmann::json::parse(body);
      std::optional<std::string> case_id;
      if (j.contains("case_id")) {
        if (!j["case_id"].is_string()) return error_response(400, "InvalidBody", "case_id must be a string");
        case_id = j["case_id"].get<std::string>();
      }
      const auto s = manager.create(*narrative, case_id);
      return {s.state == SessionState::Aborted ? 502 : 201, session_envelope(s)};
    }
    if (parts.size() == 3) {
      if (method != "GET") return error_response(405, "MethodNotAllowed", "use GET");
      return {200, session_envelope(manager.get(parts[2]))};
    }
    if (parts.size() == 4 && parts[3] == "answers") {
      if (method != "POST") return error_response(405, "MethodNotAllowed", "use POST");
      manager.get(parts[2]);  // unknown ids report 404 before body checks
      const auto answer = parse_body("text");
      if (!answer) return error_response(400, "InvalidBody", "expected {\"text\": string}");
      return {200, session_envelope(manager.answer(parts[2], *answer))};
    }
    return error_response(404, "NotFound", "no route");
  } catch (const Error& e) {
    return error_response(status_for(e.code()), errc_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "Internal", e.what());
  }
}

struct HttpService::Impl {
  httplib::Server server;
};

HttpService::HttpService(SessionManager& manager) : impl_(std::make_unique<Impl>()) {
  const auto handler = [&manager](const httplib::Request& req, httplib::Response& res) {
    const auto r = handle_request(manager, req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  impl_->server.Get(".*", handler);
  impl_->server.Post(".*", handler);
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::IoError, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(Errc::IoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace casediag
