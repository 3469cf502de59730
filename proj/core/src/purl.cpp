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

#include "casediag/purl.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "casediag/error.hpp"

namespace casediag {

PuBatch pu_batch(const CaseRecord& record, const EmbeddingProvider& embedder) {
  const std::set<NodeId> removed(record.removed.begin(), record.removed.end());
  const auto& known = record.masked_graph.nodes();
  auto b = make_pu_batch(record.case_id, record.subgraph, record.candidates, removed,
                         embedder.embed_text(record.reconstructed_description), known);
  if (!record.relevant.empty()) {
    std::set<std::string> relevant(record.relevant.begin(), record.relevant.end());
    for (const auto& n : record.candidates) b.truth.push_back(relevant.contains(n.label) ? 1 : 0);
  }
  return b;
}

std::vector<PuBatch> pu_batches(std::span<const CaseRecord* const> records, const EmbeddingProvider& embedder) {
  std::vector<PuBatch> out;
  for (const auto* r : records) {
    if (r->candidates.empty()) continue;
    auto b = pu_batch(*r, embedder);
    if (!b.positive.empty() && !b.unlabeled.empty()) out.push_back(std::move(b));
  }
  return out;
}

ArmFeatures arm_features(const PuModel& model, const std::string& case_id, const Vector& text,
                         const FactRuleGraph& g_prime, const std::vector<NodeId>& candidates,
                         const std::set<NodeId>& known) {
  if (candidates.empty()) throw Error(Errc::EmptyArmSet, "case '" + case_id + "' has no candidate facts");
  const auto input = make_pu_input(g_prime, candidates, text, known);
  const auto cache = model.forward(input);
  const Eigen::Index d = text.size();
  auto unit = [](Vector v) {
    const double n = v.norm();
    if (n > 0.0) v /= n;
    return v;
  };
  const Vector text_unit = unit(text);
  const Vector summary = unit(cache.attention.z);
  ArmFeatures f;
  f.text = text;
  f.probabilities = cache.probabilities;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    ArmContext a;
    a.case_id = case_id;
    a.arm = static_cast<int>(j);
    a.node = candidates[j];
    a.x.resize(3 * d);
    a.x.head(d) = text_unit;
    a.x.segment(d, d) = unit(model.node_row(candidates[j]));
    a.x.tail(d) = summary;
    f.contexts.push_back(std::move(a));
  }
  return f;
}

nlohmann::json PurlLogRow::to_json() const {
  return {{"case_id", case_id}, {"t", t},           {"arm", arm},         {"node", node},
          {"r_pu", r_pu},       {"r_lmrc", r_lmrc}, {"r_total", r_total}, {"regret", regret}};
}

std::string enhanced_view(const std::string& reconstructed_view, const NodeId& node) {
  return reconstructed_view.empty() ? node.label : reconstructed_view + "\n" + node.label;
}

BanditState run_case_bandit(const std::string& case_id, const Vector& text, const std::vector<ArmContext>& contexts,
                            const std::vector<Reward>& rewards, const BanditConfig& cfg, std::vector<PurlLogRow>* log) {
  if (contexts.empty()) throw Error(Errc::EmptyArmSet, "case '" + case_id + "' has no candidate facts");
  if (rewards.size() != contexts.size()) throw Error(Errc::DimensionMismatch, "one reward per arm required");
  double best = rewards.front().total;
  for (const auto& r : rewards) best = std::max(best, r.total);
  auto state = BanditState::fresh(case_id, text, static_cast<int>(contexts.front().x.size()), cfg);
  for (int t = 0; t < cfg.horizon; ++t) {
    // Every arm is played once before the confidence bound takes over.
    const auto j = static_cast<std::size_t>(t) < contexts.size() ? static_cast<std::size_t>(t)
                                                                   : static_cast<std::size_t>(ucb_select(state, contexts).chosen);
    state = ucb_update(state, contexts[j], rewards[j]);
    if (log != nullptr) {
      log->push_back({case_id, t + 1, static_cast<int>(j), contexts[j].node.label, rewards[j].r_pu, rewards[j].r_lmrc,
                      rewards[j].total, best - rewards[j].total});
    }
  }
  return state;
}

PurlResult train_purl(std::span<const CaseRecord* const> records, const PuModel& model, const LlmGateway& gateway,
                      const EmbeddingProvider& embedder, const BanditConfig& cfg) {
  cfg.validate();
  PurlResult out;
  for (const auto* r : records) {
    if (r->candidates.empty()) continue;
    const Vector text = embedder.embed_text(r->reconstructed_description);
    const auto features = arm_features(model, r->case_id, text, r->subgraph, r->candidates, r->masked_graph.nodes());
    std::vector<Reward> rewards;
    for (std::size_t j = 0; j < features.contexts.size(); ++j) {
      const auto& node = features.contexts[j].node;
      try {
        const double r_lmrc = gateway.rc_score(r->case_id, enhanced_view(r->reconstructed_view, node), r->questions);
        rewards.push_back(fuse_reward(features.probabilities[static_cast<Eigen::Index>(j)], r_lmrc, cfg.lambda));
      } catch (const Error& e) {
        throw Error(e.code(), "case '" + r->case_id + "', arm " + std::to_string(j) + " (" + node.label + "): " + e.what());
      }
    }
    out.archive.states.push_back(run_case_bandit(r->case_id, text, features.contexts, rewards, cfg, &out.log));
  }
  return out;
}

}  // namespace casediag
