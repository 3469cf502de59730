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

#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "casediag/bandit.hpp"
#include "casediag/corpus.hpp"
#include "casediag/embedding.hpp"
#include "casediag/gateway.hpp"
#include "casediag/pu_model.hpp"

namespace casediag {

/// PU training batch of an approved record: the reconstructed description is
/// the text, removed facts among the candidates are the positives, and the
/// record's relevant labels (when present) become evaluation truth.
PuBatch pu_batch(const CaseRecord& record, const EmbeddingProvider& embedder);

/// Batches usable for training: at least one positive and one unlabeled node.
std::vector<PuBatch> pu_batches(std::span<const CaseRecord* const> records, const EmbeddingProvider& embedder);

/// Bandit contexts for every candidate: [h, embedding row of the candidate,
/// attention summary], each segment scaled to unit length.
struct ArmFeatures {
  Vector text;
  std::vector<ArmContext> contexts;
  Vector probabilities;  // PU scores, one per candidate
};

ArmFeatures arm_features(const PuModel& model, const std::string& case_id, const Vector& text,
                         const FactRuleGraph& g_prime, const std::vector<NodeId>& candidates,
                         const std::set<NodeId>& known);

struct PurlLogRow {
  std::string case_id;
  int t = 0;
  int arm = 0;
  std::string node;
  double r_pu = 0.0;
  double r_lmrc = 0.0;
  double r_total = 0.0;
  double regret = 0.0;  // best known total reward minus the played one

  nlohmann::json to_json() const;
};

struct PurlResult {
  BanditArchive archive;
  std::vector<PurlLogRow> log;
};

/// Enhanced view scored by reading comprehension when `node` is recovered.
std::string enhanced_view(const std::string& reconstructed_view, const NodeId& node);

/// Runs T rounds of select / update for one case against precomputed
/// per-arm rewards, playing each arm once before selecting by upper
/// confidence bound. Regret is measured against the best arm.
BanditState run_case_bandit(const std::string& case_id, const Vector& text, const std::vector<ArmContext>& contexts,
                            const std::vector<Reward>& rewards, const BanditConfig& cfg, std::vector<PurlLogRow>* log);

/// One bandit per record, rewards fused from the frozen PU model's scores and
/// the gateway's reading-comprehension score of the enhanced view.
PurlResult train_purl(std::span<const CaseRecord* const> records, const PuModel& model, const LlmGateway& gateway,
                      const EmbeddingProvider& embedder, const BanditConfig& cfg);

}  // namespace casediag
