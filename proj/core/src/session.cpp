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

#include "casediag/session.hpp"

#include <chrono>

#include <nlohmann/json.hpp>

#include "casediag/error.hpp"
#include "casediag/purl.hpp"
#include "casediag/text.hpp"

namespace casediag {

namespace {

std::int64_t now_ms(const SessionModels& m) {
  if (m.clock) return m.clock();
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::vector<ConfirmedFact> known_facts(const DialogueSession& s) {
  std::vector<ConfirmedFact> out;
  for (const auto& c : s.confirmed) {
    if (!c.unknown) out.push_back({c.node, c.answer});
  }
  return out;
}

void finish(DialogueSession& s, bool forced) {
  s.state = SessionState::Complete;
  s.forced_complete = forced;
  s.pending.reset();
  s.pending_question.clear();
}

NodeId choose(DialogueSession& s, const SessionModels& m, const FactRuleGraph& g_prime,
              const std::vector<NodeId>& candidates, const std::set<NodeId>& known) {
  const Vector text = m.embedder->embed_text(s.current_text());
  const auto features = arm_features(*m.pu, s.case_id, text, g_prime, candidates, known);
  const BanditState* bandit = nullptr;
  if (m.bandits != nullptr) {
    bandit = m.bandits->find(s.case_id);
    if (bandit == nullptr) bandit = m.bandits->nearest(text);
  }
  if (bandit == nullptr) {
    s.bandit_id.clear();
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < features.probabilities.size(); ++j) {
      if (features.probabilities[j] > features.probabilities[best]) best = j;
    }
    return candidates[static_cast<std::size_t>(best)];
  }
  s.bandit_id = bandit->case_id;
  return candidates[static_cast<std::size_t>(ucb_select(*bandit, features.contexts).chosen)];
}

void deliberate(DialogueSession& s, const SessionModels& m, const LlmGateway& gateway) {
  s.state = SessionState::Deliberating;
  try {
    const auto view = gateway.generate_court_view(s.case_id, s.current_text(), known_facts(s));
    s.draft_view = view.view;
    s.verdict = view.verdict;
    s.degraded = view.degraded;
    if (view.verdict == Verdict::Yes) return finish(s, false);
    if (s.turn >= s.max_turns) return finish(s, true);

    FactRuleGraph seeds_graph = s.case_graph;
    for (const auto& c : s.confirmed) {
      if (!c.unknown) seeds_graph.add_node(c.node);
    }
    const FactRuleGraph both[] = {*m.global_graph, s.case_graph};
    const auto world = merge(both);
    std::vector<NodeId> candidates;
    if (!seeds_graph.nodes().empty()) {
      const auto g_prime = n_hop_subgraph(world, seeds_graph.nodes(), m.n_hop);
      for (const auto& n : candidate_facts(g_prime, seeds_graph).facts) {
        if (!s.asked.contains(n)) candidates.push_back(n);
      }
      if (!candidates.empty()) {
        const auto node = choose(s, m, g_prime, candidates, seeds_graph.nodes());
        s.pending_question = gateway.node_to_question(s.case_id, node, g_prime);
        s.pending = node;
        s.asked.insert(node);
        s.transcript.push_back({"question", s.pending_question, node.label, now_ms(m)});
        s.state = SessionState::AwaitingAnswer;
        return;
      }
    }
    finish(s, true);
  } catch (const Error& e) {
    s.state = SessionState::Aborted;
    s.abort_cause = e.what();
    s.pending.reset();
    s.pending_question.clear();
  }
}

}  // namespace

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::AwaitingAnswer:
      return "AwaitingAnswer";
    case SessionState::Deliberating:
      return "Deliberating";
    case SessionState::Complete:
      return "Complete";
    case SessionState::Aborted:
      return "Aborted";
  }
  return "Aborted";
}

std::string DialogueSession::current_text() const {
  std::string out = narrative;
  for (const auto& c : confirmed) {
    if (!c.unknown) out += "\nConfirmed fact - " + c.node.label + ": " + c.answer;
  }
  return out;
}

std::size_t DialogueSession::question_count() const {
  std::size_t n = 0;
  for (const auto& t : transcript) n += t.role == "question";
  return n;
}

nlohmann::json DialogueSession::to_json() const {
  nlohmann::json j;
  j["id"] = id;
  j["case_id"] = case_id;
  j["state"] = to_string(state);
  j["turn"] = turn;
  j["max_turns"] = max_turns;
  j["narrative"] = narrative;
  j["draft_view"] = draft_view;
  j["verdict"] = verdict ? nlohmann::json(to_string(*verdict)) : nlohmann::json(nullptr);
  j["degraded"] = degraded;
  j["forced_complete"] = forced_complete;
  j["bandit_id"] = bandit_id;
  j["pending_question"] = pending ? nlohmann::json(pending_question) : nlohmann::json(nullptr);
  j["pending_node"] = pending ? nlohmann::json(pending->label) : nlohmann::json(nullptr);
  auto confirmed_json = nlohmann::json::array();
  for (const auto& c : confirmed) {
    confirmed_json.push_back({{"label", c.node.label}, {"answer", c.answer}, {"unknown", c.unknown}});
  }
  j["confirmed_facts"] = std::move(confirmed_json);
  auto transcript_json = nlohmann::json::array();
  for (const auto& t : transcript) {
    transcript_json.push_back({{"role", t.role}, {"text", t.text}, {"node", t.node}, {"timestamp_ms", t.timestamp_ms}});
  }
  j["transcript"] = std::move(transcript_json);
  j["abort_cause"] = abort_cause.empty() ? nlohmann::json(nullptr) : nlohmann::json(abort_cause);
  return j;
}

DialogueSession open_session(std::string session_id, std::string narrative, std::optional<std::string> case_id,
                             const SessionModels& models, const LlmGateway& gateway, int max_turns) {
  if (text::trim(narrative).empty()) throw Error(Errc::EmptyText, "narrative is empty");
  if (max_turns < 1) throw Error(Errc::InvalidArgument, "max_turns must be positive");
  if (models.pu == nullptr || models.embedder == nullptr || models.global_graph == nullptr) {
    throw Error(Errc::InvalidArgument, "session models are incomplete");
  }
  DialogueSession s;
  s.id = std::move(session_id);
  s.case_id = case_id && !case_id->empty() ? *case_id : text::content_id(narrative);
  s.narrative = std::move(narrative);
  s.max_turns = max_turns;
  try {
    s.case_graph = gateway.extract_graph(s.case_id, s.narrative);
  } catch (const Error& e) {
    s.state = SessionState::Aborted;
    s.abort_cause = e.what();
    return s;
  }
  deliberate(s, models, gateway);
  return s;
}

bool is_unknown_answer(std::string_view answer) {
  static const std::set<std::string> phrases = {"i dont know", "i do not know", "dont know", "unknown", "not sure",
                                                "i am not sure", "im not sure", "no idea", "idk"};
  return phrases.contains(text::join(text::tokenize(answer), " "));
}

DialogueSession submit_answer(DialogueSession s, std::string answer, const SessionModels& models,
                              const LlmGateway& gateway) {
  if (s.state != SessionState::AwaitingAnswer || !s.pending) {
    throw Error(Errc::WrongState, "session '" + s.id + "' is " + std::string(to_string(s.state)) +
                                      ", not awaiting an answer");
  }
  answer = text::trim(answer);
  if (answer.empty()) throw Error(Errc::EmptyText, "answer is empty");
  const bool unknown = is_unknown_answer(answer);
  s.transcript.push_back({"answer", answer, s.pending->label, now_ms(models)});
  s.confirmed.push_back({*s.pending, answer, unknown});
  s.pending.reset();
  s.pending_question.clear();
  ++s.turn;
  deliberate(s, models, gateway);
  return s;
}

ClientOracle::ClientOracle(std::string full_description) : sentences_(text::split_sentences(full_description)) {}

std::string ClientOracle::answer(const NodeId& node) const {
  std::vector<std::string> hits;
  for (const auto& s : sentences_) {
    if (text::contains_phrase(text::tokenize(s), node.label)) hits.push_back(s);
  }
  return hits.empty() ? "I don't know" : text::join(hits, " ");
}

nlohmann::json SimulationReport::to_json() const {
  return {{"case_id", case_id},
          {"turns", turns},
          {"recovery_rate", recovery_rate},
          {"rouge1", scores.rouge1},
          {"rouge2", scores.rouge2},
          {"rougeL", scores.rougeL},
          {"bleu1", scores.bleu1},
          {"bleu2", scores.bleu2},
          {"bleuN", scores.bleuN},
          {"forced_complete", forced_complete}};
}

SimulationReport simulate(const CaseRecord& record, const SessionModels& models, const LlmGateway& gateway,
                          int max_turns) {
  const ClientOracle oracle(record.description);
  auto s = open_session("sim-" + record.case_id, record.reconstructed_description, record.case_id, models, gateway,
                        max_turns);
  while (s.state == SessionState::AwaitingAnswer) {
    s = submit_answer(std::move(s), oracle.answer(*s.pending), models, gateway);
  }
  if (s.state == SessionState::Aborted) {
    throw Error(Errc::BackendUnavailable, "simulation of case '" + record.case_id + "' aborted: " + s.abort_cause);
  }
  SimulationReport r;
  r.case_id = record.case_id;
  r.turns = s.turn;
  r.forced_complete = s.forced_complete;
  r.final_view = s.draft_view;
  for (const auto& c : s.confirmed) r.asked.push_back(c.node.label);
  std::size_t recovered = 0;
  for (const auto& removed : record.removed) {
    for (const auto& c : s.confirmed) recovered += !c.unknown && c.node == removed;
  }
  r.recovery_rate = record.removed.empty() ? 1.0 : static_cast<double>(recovered) / record.removed.size();
  r.scores = metrics::score_text(s.draft_view, record.court_view);
  return r;
}

}  // namespace casediag
