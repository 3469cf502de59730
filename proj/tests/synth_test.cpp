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

#include <set>
#include <string>

#include <gtest/gtest.h>

#include "casediag/error.hpp"
#include "casediag/rng.hpp"
#include "casediag/synth.hpp"
#include "casediag/text.hpp"

namespace casediag {
namespace {

TEST(Synth, FactCountsWithinBounds) {
  const auto corpus = synth_corpus(60, 3);
  ASSERT_EQ(corpus.cases.size(), 60u);
  for (const auto& c : corpus.cases) {
    EXPECT_GE(c.graph.fact_count(), static_cast<std::size_t>(kSynthMinFacts)) << c.case_id;
    EXPECT_LE(c.graph.fact_count(), static_cast<std::size_t>(kSynthMaxFacts)) << c.case_id;
    EXPECT_EQ(c.fact_sentences.size(), c.graph.fact_count());
    EXPECT_EQ(c.questions.items.size(), kQuestionsPerCase);
  }
}

TEST(Synth, SentencesMentionOnlyTheirOwnFact) {
  const auto corpus = synth_corpus(40, 9);
  const auto vocab = synth_fact_vocabulary();
  for (const auto& c : corpus.cases) {
    const auto facts = c.graph.fact_nodes();
    for (std::size_t i = 0; i < facts.size(); ++i) {
      const auto tokens = text::tokenize(c.fact_sentences[i]);
      EXPECT_TRUE(text::contains_phrase(tokens, facts[i].label)) << c.fact_sentences[i];
      for (const auto& label : vocab) {
        if (label == facts[i].label) continue;
        EXPECT_FALSE(text::contains_phrase(tokens, label)) << c.fact_sentences[i] << " mentions " << label;
      }
    }
  }
}

TEST(Synth, SingleCaseIsBurglary) {
  const auto corpus = synth_corpus(1, 0);
  ASSERT_EQ(corpus.cases.size(), 1u);
  const auto& c = corpus.cases[0];
  EXPECT_EQ(c.case_id, "synth-0001");
  EXPECT_EQ(c.crime, "burglary");
  for (const char* core : {"forced entry", "stolen goods", "dwelling"}) {
    EXPECT_TRUE(c.graph.contains(fact(core))) << core;
  }
  for (const auto& f : c.graph.fact_nodes()) {
    EXPECT_TRUE(c.graph.edges().contains(Edge{f, rule("burglary statute"), Relation::Violates})) << f.label;
  }
}

TEST(Synth, Deterministic) {
  const auto a = synth_corpus(25, 42);
  const auto b = synth_corpus(25, 42);
  ASSERT_EQ(a.cases.size(), b.cases.size());
  std::string all;
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    EXPECT_EQ(a.cases[i].raw_text, b.cases[i].raw_text);
    EXPECT_EQ(a.cases[i].graph, b.cases[i].graph);
    all += a.cases[i].raw_text + serialize(a.cases[i].graph);
  }
  EXPECT_EQ(a.fixtures.to_jsonl(), b.fixtures.to_jsonl());
  EXPECT_EQ(fnv1a64(all), 0xd90a1638a71e4d17ull);
  EXPECT_NE(synth_corpus(25, 43).cases[0].raw_text + synth_corpus(25, 43).cases[1].raw_text,
            a.cases[0].raw_text + a.cases[1].raw_text);
}

TEST(Synth, RejectsEmptyCorpus) {
  try {
    synth_corpus(0, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidArgument);
  }
}

TEST(Synth, DemoOmitsAlibi) {
  const auto d = demo_scenario();
  EXPECT_EQ(d.full.case_id, "demo-alibi");
  ASSERT_EQ(d.masked, std::vector<std::string>{"alibi"});
  EXPECT_TRUE(d.full.graph.contains(fact("alibi")));
  EXPECT_EQ(d.full.questions.items.size(), kQuestionsPerCase);
}

}  // namespace
}  // namespace casediag
