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
#include <string>
#include <vector>

#include "casediag/gateway.hpp"
#include "casediag/graph.hpp"

namespace casediag {

/// One template-generated criminal case together with everything a scripted
/// backend needs to answer the pipeline's prompts about it.
struct SynthCase {
  std::string case_id;
  std::string crime;
  std::string raw_text;
  FactRuleGraph graph;                   // golden graph
  IracSummary irac;
  RcQuestionSet questions;
  std::vector<std::string> fact_sentences;  // one per fact, in graph order
  std::vector<std::string> relevant;        // every fact label of the template pool
};

struct SynthCorpus {
  std::vector<SynthCase> cases;
  FixtureSet fixtures;
};

inline constexpr int kSynthMinFacts = 4;
inline constexpr int kSynthMaxFacts = 12;

/// Five crime templates (burglary, assault, fraud, drug possession, theft),
/// each with a private fact pool, a private statute and shared evidence and
/// criminal-code rules. Each case draws 4..12 facts including the template's
/// core facts. Deterministic in (n_cases, seed).
SynthCorpus synth_corpus(int n_cases, std::uint64_t seed);

/// Scripted responses for one case: graph extraction, classification, IRAC,
/// questions and the court-view rule.
FixtureSet fixtures_for(const SynthCase& c);

/// Every fact label of every template.
std::vector<std::string> synth_fact_vocabulary();

/// Bundled consultation scenario: a bar altercation whose client narrative
/// leaves out the alibi. Returns the full case; `masked` names the facts the
/// client omits.
struct DemoScenario {
  SynthCase full;
  std::vector<std::string> masked;
};
DemoScenario demo_scenario();

}  // namespace casediag
