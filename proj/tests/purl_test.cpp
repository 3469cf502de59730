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

#include <cmath>
#include <memory>
#include <string>

#include <gtest/gtest.h>

#include "casediag/corpus.hpp"
#include "casediag/pipeline.hpp"
#include "casediag/purl.hpp"
#include "casediag/synth.hpp"
#include "casediag/text.hpp"

namespace casediag {
namespace {

constexpr int kDim = 16;

struct Planted {
  std::vector<PurlLogRow> log;
  int planted = 0;
};

// K candidates hanging off one statute; every arm earns r_lmrc = other except
// the planted one, which earns 1.
Planted play_planted(int seed, int k, int horizon, double other) {
  HashEmbeddingProvider emb(kDim);
  const auto model = PuModel::initialize(PuArchitecture{kDim, 2, {}}, 1);
  FactRuleGraph g;
  std::vector<NodeId> cands;
  for (int j = 0; j < k; ++j) {
    auto n = fact("candidate " + std::to_string(seed) + " " + std::to_string(j));
    g.add_edge(n, rule("statute"), Relation::Violates);
    cands.push_back(n);
  }
  g.add_edge(fact("known"), rule("statute"), Relation::Violates);
  const auto text = emb.embed_text("case " + std::to_string(seed));
  const auto f = arm_features(model, "c", text, g, cands, {fact("known")});
  Planted out;
  out.planted = seed % k;
  std::vector<Reward> rewards;
  for (int j = 0; j < k; ++j) rewards.push_back(fuse_reward(0.5, j == out.planted ? 1.0 : other, 0.5));
  BanditConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.horizon = horizon;
  run_case_bandit("c" + std::to_string(seed), text, f.contexts, rewards, cfg, &out.log);
  return out;
}

TEST(Purl, ArmFeatureSegmentsAreUnit) {
  HashEmbeddingProvider emb(kDim);
  const auto model = PuModel::initialize(PuArchitecture{kDim, 2, {}}, 3);
  const auto synth = synth_corpus(1, 2);
  const auto& g = synth.cases[0].graph;
  const auto facts = g.fact_nodes();
  const std::vector<NodeId> cands(facts.begin(), facts.begin() + 3);
  const std::set<NodeId> known(facts.begin() + 3, facts.end());
  const auto f = arm_features(model, "c", emb.embed_text("text"), g, cands, known);
  ASSERT_EQ(f.contexts.size(), 3u);
  ASSERT_EQ(f.probabilities.size(), 3);
  for (std::size_t j = 0; j < f.contexts.size(); ++j) {
    const auto& x = f.contexts[j].x;
    ASSERT_EQ(x.size(), 3 * kDim);
    for (int s = 0; s < 3; ++s) EXPECT_NEAR(x.segment(s * kDim, kDim).norm(), 1.0, 1e-9);
    EXPECT_EQ(f.contexts[j].node, cands[j]);
    EXPECT_GT(f.probabilities[j], 0.0);
    EXPECT_LT(f.probabilities[j], 1.0);
  }
}

TEST(Purl, PlantedArmFoundAcrossSeeds) {
  constexpr int kSeeds = 20;
  constexpr int kHorizon = 50;
  double freq = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto p = play_planted(seed, 10, kHorizon, 0.5);
    ASSERT_EQ(p.log.size(), static_cast<std::size_t>(kHorizon));
    int hits = 0;
    for (int t = kHorizon / 2; t < kHorizon; ++t) hits += p.log[t].arm == p.planted;
    freq += hits / static_cast<double>(kHorizon / 2) / kSeeds;
  }
  EXPECT_GT(freq, 0.8);
}

TEST(Purl, RegretShrinks) {
  double early = 0.0;
  double late = 0.0;
  for (int seed = 0; seed < 10; ++seed) {
    const auto p = play_planted(seed, 8, 48, 0.6);
    for (int t = 0; t < 16; ++t) early += p.log[t].regret;
    for (int t = 32; t < 48; ++t) late += p.log[t].regret;
    for (const auto& row : p.log) EXPECT_GE(row.regret, 0.0);
  }
  EXPECT_LT(late, 0.25 * early);
}

TEST(Purl, WarmStartPlaysEveryArm) {
  const auto p = play_planted(4, 6, 20, 0.5);
  for (int t = 0; t < 6; ++t) EXPECT_EQ(p.log[t].arm, t);
}

TEST(Purl, EnhancedViewMentionsNode) {
  const auto v = enhanced_view("The accused was acquitted.", fact("alibi"));
  EXPECT_TRUE(text::contains_phrase(text::tokenize(v), "alibi"));
}

class PurlCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto synth = synth_corpus(12, 21);
    gateway_ = std::make_unique<LlmGateway>(GatewayConfig{}, std::make_shared<ScriptedMockBackend>(synth.fixtures));
    std::vector<CaseRecord> records;
    DatagenConfig dc;
    dc.seed = 21;
    for (const auto& in : synth_inputs(synth)) records.push_back(build_case(in, *gateway_, dc));
    corpus_ = std::make_unique<Corpus>(finalize_corpus(std::move(records), dc, {}));
  }
  static void TearDownTestSuite() {
    corpus_.reset();
    gateway_.reset();
  }
  static std::unique_ptr<LlmGateway> gateway_;
  static std::unique_ptr<Corpus> corpus_;
};

std::unique_ptr<LlmGateway> PurlCorpus::gateway_;
std::unique_ptr<Corpus> PurlCorpus::corpus_;

TEST_F(PurlCorpus, ZeroLambdaRewardIsPuScore) {
  HashEmbeddingProvider emb(kDim);
  const auto model = PuModel::initialize(PuArchitecture{kDim, 2, {}}, 5);
  BanditConfig cfg;
  cfg.lambda = 0.0;
  cfg.horizon = 10;
  const auto records = corpus_->approved();
  const auto res = train_purl(records, model, *gateway_, emb, cfg);
  ASSERT_EQ(res.archive.states.size(), records.size());
  ASSERT_EQ(res.log.size(), records.size() * 10);
  for (const auto& row : res.log) EXPECT_EQ(row.r_total, row.r_pu);
}

TEST_F(PurlCorpus, DeterministicAndRoutable) {
  HashEmbeddingProvider emb(kDim);
  const auto model = PuModel::initialize(PuArchitecture{kDim, 2, {}}, 5);
  BanditConfig cfg;
  cfg.horizon = 12;
  cfg.seed = 3;
  const auto records = corpus_->approved();
  const auto a = train_purl(records, model, *gateway_, emb, cfg);
  const auto b = train_purl(records, model, *gateway_, emb, cfg);
  EXPECT_EQ(a.archive.to_json(), b.archive.to_json());
  for (const auto* r : records) {
    const auto* s = a.archive.find(r->case_id);
    ASSERT_NE(s, nullptr);
    EXPECT_EQ(s->round, 12);
    EXPECT_EQ(a.archive.nearest(s->case_text), s);
  }
  for (const auto& row : a.log) {
    EXPECT_NEAR(row.r_total, row.r_pu + 0.5 * row.r_lmrc, 1e-12);
    EXPECT_GE(row.r_lmrc, 0.0);
    EXPECT_LE(row.r_lmrc, 1.0);
  }
}

}  // namespace
}  // namespace casediag
