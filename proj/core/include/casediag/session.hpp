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
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "casediag/bandit.hpp"
#include "casediag/corpus.hpp"
#include "casediag/embedding.hpp"
#include "casediag/gateway.hpp"
#include "casediag/metrics.hpp"
#include "casediag/pu_model.hpp"

namespace casediag {

enum class SessionState { AwaitingAnswer, Deliberating, Complete, Aborted };

std::string_view to_string(SessionState s);

inline constexpr int kDefaultMaxTurns = 8;

struct TranscriptEntry {
  std::string role;  // "question" or "answer"
  std::string text;
  std::string node;
  std::int64_t timestamp_ms = 0;
};

struct ConfirmedEntry {
  NodeId node;
  std::string answer;
  bool unknown = false;
};

struct DialogueSession {
  std::string id;
  std::string case_id;
  std::string narrative;
  std::vector<ConfirmedEntry> confirmed;
  std::vector<TranscriptEntry> transcript;
  SessionState state = SessionState::Deliberating;
  std::string draft_view;
  std::optional<Verdict> verdict;
  bool degraded = false;
  bool forced_complete = false;
  int turn = 0;
  int max_turns = kDefaultMaxTurns;
  std::string bandit_id;
  std::optional<NodeId> pending;
  std::string pending_question;
  std::string abort_cause;
  FactRuleGraph case_graph;
  std::set<NodeId> asked;

  /// Narrative followed by one "Confirmed fact - label: answer" line per known answer.
  std::string current_text() const;
  std::size_t question_count() const;
  nlohmann::json to_json() const;
};

/// Read-only models shared by every session.
struct SessionModels {
  const PuModel* pu = nullptr;
  const BanditArchive* bandits = nullptr;
  const EmbeddingProvider* embedder = nullptr;
  const FactRuleGraph* global_graph = nullptr;
  int n_hop = 2;
  std::function<std::int64_t()> clock;  // milliseconds; system clock when empty
};

/// Maps the narrative to a graph, then deliberates once. Gateway and model
/// failures leave the session Aborted with the cause. Without a case id the
/// content id of the narrative is used.
DialogueSession open_session(std::string session_id, std::string narrative, std::optional<std::string> case_id,
                             const SessionModels& models, const LlmGateway& gateway, int max_turns = kDefaultMaxTurns);

/// Records the answer for the pending node and deliberates again. Throws
/// WrongState unless the session awaits an answer.
DialogueSession submit_answer(DialogueSession session, std::string answer, const SessionModels& models,
                              const LlmGateway& gateway);

/// True for answers such as "I don't know" or "not sure".
bool is_unknown_answer(std::string_view answer);

/// Simulated client answering from the full fact description of a case.
class ClientOracle {
 public:
  explicit ClientOracle(std::string full_description);
  /// Sentences mentioning the node's label, or "I don't know".
  std::string answer(const NodeId& node) const;

 private:
  std::vector<std::string> sentences_;
};

struct SimulationReport {
  std::string case_id;
  int turns = 0;
  double recovery_rate = 0.0;
  metrics::TextScore scores;
  bool forced_complete = false;
  std::string final_view;
  std::vector<std::string> asked;

  nlohmann::json to_json() const;
};

/// Runs a session on the reconstructed description with a client oracle
/// built from the full description, then scores the final view against the
/// gold court view.
SimulationReport simulate(const CaseRecord& record, const SessionModels& models, const LlmGateway& gateway,
                          int max_turns = kDefaultMaxTurns);

}  // namespace casediag
