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

#include "casediag/pipeline.hpp"

#include <nlohmann/json.hpp>

#include "casediag/error.hpp"
#include "casediag/purl.hpp"

namespace casediag {

std::vector<CaseInput> synth_inputs(const SynthCorpus& corpus) {
  std::vector<CaseInput> out;
  for (const auto& c : corpus.cases) out.push_back({c.case_id, c.raw_text, c.relevant, std::nullopt});
  return out;
}

std::vector<const CaseRecord*> select_records(const Corpus& corpus, Split split) {
  return split == Split::None ? corpus.approved() : corpus.split(split);
}

PuTrainingResult train_pu_on(std::span<const CaseRecord* const> records, const EmbeddingProvider& embedder,
                             const TrainingConfig& cfg) {
  if (embedder.dim() != cfg.arch.dim) {
    throw Error(Errc::DimensionMismatch, "embedding dim " + std::to_string(embedder.dim()) + " != model dim " +
                                             std::to_string(cfg.arch.dim));
  }
  auto batches = pu_batches(records, embedder);
  if (batches.empty()) throw Error(Errc::InsufficientCorpus, "no record has both masked and unlabeled candidates");
  for (auto& b : batches) b.prior = empirical_prior(b);
  return train_domain_pu(batches, cfg);
}

metrics::ClassificationScore evaluate_pu(const PuModel& model, std::span<const CaseRecord* const> records,
                                         const EmbeddingProvider& embedder) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto* r : records) {
    if (r->candidates.empty() || r->relevant.empty()) continue;
    const auto b = pu_batch(*r, embedder);
    const Vector p = model.probabilities(b.input);
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      scores.push_back(p[j]);
      labels.push_back(b.truth[static_cast<std::size_t>(j)]);
    }
  }
  return metrics::classification_metrics(scores, labels);
}

DemoBundle demo_bundle(int background_cases, std::uint64_t seed) {
  DemoBundle out;
  auto corpus = synth_corpus(background_cases, seed);
  out.inputs = synth_inputs(corpus);
  out.fixtures = std::move(corpus.fixtures);
  const auto demo = demo_scenario();
  out.case_id = demo.full.case_id;
  out.inputs.push_back({demo.full.case_id, demo.full.raw_text, demo.full.relevant, demo.masked});
  out.fixtures.merge(fixtures_for(demo.full));
  return out;
}

std::vector<SimulationReport> simulate_records(std::span<const CaseRecord* const> records,
                                               const SessionModels& models, const LlmGateway& gateway,
                                               int max_turns) {
  std::vector<SimulationReport> out;
  for (const auto* r : records) out.push_back(simulate(*r, models, gateway, max_turns));
  return out;
}

std::string reports_jsonl(const std::vector<SimulationReport>& reports) {
  std::string out;
  for (const auto& r : reports) out += r.to_json().dump() + "\n";
  return out;
}

}  // namespace casediag
