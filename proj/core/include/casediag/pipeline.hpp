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
#include <span>
#include <string>
#include <vector>

#include "casediag/corpus.hpp"
#include "casediag/metrics.hpp"
#include "casediag/pu_train.hpp"
#include "casediag/session.hpp"
#include "casediag/synth.hpp"

namespace casediag {

/// Datagen inputs for a synthetic corpus; relevant labels come from the template pool.
std::vector<CaseInput> synth_inputs(const SynthCorpus& corpus);

/// Records of a split; Split::None selects every approved record.
std::vector<const CaseRecord*> select_records(const Corpus& corpus, Split split);

/// Trains the shared scorer on the batches of `records`. Per-case priors come
/// from ground truth where the records carry it.
PuTrainingResult train_pu_on(std::span<const CaseRecord* const> records, const EmbeddingProvider& embedder,
                             const TrainingConfig& cfg);

/// Threshold metrics of the scorer over every candidate with known truth.
metrics::ClassificationScore evaluate_pu(const PuModel& model, std::span<const CaseRecord* const> records,
                                         const EmbeddingProvider& embedder);

/// Background synthetic cases plus the consultation scenario with its
/// omitted facts forced as the mask.
struct DemoBundle {
  std::vector<CaseInput> inputs;
  FixtureSet fixtures;
  std::string case_id;
};

DemoBundle demo_bundle(int background_cases, std::uint64_t seed);

std::vector<SimulationReport> simulate_records(std::span<const CaseRecord* const> records,
                                               const SessionModels& models, const LlmGateway& gateway,
                                               int max_turns = kDefaultMaxTurns);

/// One JSON object per line, in input order.
std::string reports_jsonl(const std::vector<SimulationReport>& reports);

}  // namespace casediag
