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

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "casediag/error.hpp"
#include "casediag/graph.hpp"
#include "oracles.hpp"

namespace casediag {
namespace {

FactRuleGraph chain() {
  FactRuleGraph g;
  g.add_edge(fact("a"), fact("b"), Relation::DependsOn);
  g.add_edge(fact("b"), fact("c"), Relation::DependsOn);
  g.add_edge(fact("c"), fact("d"), Relation::DependsOn);
  return g;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::InvalidArgument;
}

TEST(Canonicalize, TrimsAndLowerCases) {
  EXPECT_EQ(canonicalize("  Contract ", NodeKind::Fact), (NodeId{"contract", NodeKind::Fact}));
}

TEST(Canonicalize, Idempotent) {
  const auto once = canonicalize("contract", NodeKind::Fact);
  EXPECT_EQ(canonicalize(once.label, once.kind), once);
}

TEST(Canonicalize, CollapsesWhitespace) {
  EXPECT_EQ(canonicalize("Contract Law", NodeKind::Rule), canonicalize("contract   law", NodeKind::Rule));
  EXPECT_NE(canonicalize("contract", NodeKind::Rule), canonicalize("contract", NodeKind::Fact));
}

TEST(Canonicalize, RejectsBlank) {
  EXPECT_EQ(code_of([] { canonicalize(" \t\n", NodeKind::Fact); }), Errc::EmptyLabel);
}

TEST(FactRuleGraph, EdgeInvariants) {
  FactRuleGraph g;
  EXPECT_EQ(code_of([&] { g.add_edge(fact("a"), fact("a"), Relation::DependsOn); }), Errc::InvalidEdge);
  EXPECT_EQ(code_of([&] { g.add_edge(fact("a"), rule("r"), Relation::DependsOn); }), Errc::InvalidEdge);
  EXPECT_EQ(code_of([&] { g.add_edge(fact("a"), fact("b"), Relation::Violates); }), Errc::InvalidEdge);
  EXPECT_EQ(code_of([&] { g.add_edge(rule("r"), fact("b"), Relation::CompliesWith); }), Errc::InvalidEdge);
  g.add_edge(fact("a"), rule("r"), Relation::Violates);
  g.add_edge(fact("a"), rule("r"), Relation::Violates);
  EXPECT_EQ(g.edges().size(), 1u);
  EXPECT_TRUE(g.contains(fact("a")) && g.contains(rule("r")));
}

TEST(MaskGraph, RemovesCeilingOfRatio) {
  FactRuleGraph g;
  for (auto l : {"a", "b", "c", "d"}) g.add_edge(fact(l), rule("r1"), Relation::CompliesWith);
  const auto m = mask_graph(g, 0.25, 7);
  EXPECT_EQ(m.removed.size(), 1u);
  EXPECT_EQ(m.masked.fact_count(), 3u);
  EXPECT_TRUE(m.masked.contains(rule("r1")));
  for (const auto& e : m.masked.edges()) EXPECT_FALSE(m.removed.contains(e.source));
}

TEST(MaskGraph, DeterministicPerSeed) {
  const auto g = oracle::random_graph(3, 20, 0.2);
  const auto a = mask_graph(g, 0.3, 99);
  const auto b = mask_graph(g, 0.3, 99);
  EXPECT_EQ(a.removed, b.removed);
  EXPECT_EQ(a.masked, b.masked);
}

TEST(MaskGraph, NeverRemovesEveryFact) {
  FactRuleGraph g;
  g.add_edge(fact("a"), fact("b"), Relation::DependsOn);
  const auto m = mask_graph(g, 0.99, 1);
  EXPECT_EQ(m.removed.size(), 1u);
  EXPECT_EQ(m.masked.fact_count(), 1u);
}

TEST(MaskGraph, SingleFactIsTooFew) {
  FactRuleGraph g;
  g.add_edge(fact("a"), rule("r"), Relation::Violates);
  EXPECT_EQ(code_of([&] { mask_graph(g, 0.5, 1); }), Errc::TooFewFacts);
}

TEST(MaskGraph, PartitionsFactNodes) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = oracle::random_graph(seed, 15, 0.2);
    if (g.fact_count() < 2) continue;
    const auto m = mask_graph(g, 0.25, seed);
    std::set<NodeId> facts;
    for (const auto& f : m.masked.fact_nodes()) facts.insert(f);
    for (const auto& r : m.removed) {
      EXPECT_EQ(r.kind, NodeKind::Fact);
      EXPECT_TRUE(facts.insert(r).second);
    }
    const auto all = g.fact_nodes();
    EXPECT_EQ(facts, std::set<NodeId>(all.begin(), all.end()));
    EXPECT_EQ(m.masked.rule_nodes(), g.rule_nodes());
  }
}

TEST(Merge, UnionOfNodesAndEdges) {
  FactRuleGraph g1;
  g1.add_edge(fact("a"), rule("r1"), Relation::CompliesWith);
  FactRuleGraph g2;
  g2.add_edge(fact("A "), rule("r1"), Relation::CompliesWith);
  g2.add_edge(fact("b"), rule("R1"), Relation::CompliesWith);
  const std::vector<FactRuleGraph> gs{g1, g2};
  const auto m = merge(gs);
  EXPECT_EQ(m.nodes(), (std::set<NodeId>{fact("a"), fact("b"), rule("r1")}));
  EXPECT_EQ(m.edges().size(), 2u);
}

TEST(Merge, EmptyListIsEmptyGraph) {
  const auto m = merge(std::span<const FactRuleGraph>{});
  EXPECT_TRUE(m.nodes().empty());
  EXPECT_TRUE(m.edges().empty());
}

TEST(Merge, IdempotentAndAssociative) {
  const auto g = oracle::random_graph(11, 12, 0.2);
  const std::vector<FactRuleGraph> twice{g, g};
  EXPECT_TRUE(merge(twice).same_structure(g));
  const auto a = oracle::random_graph(1, 8, 0.3);
  const auto b = oracle::random_graph(2, 8, 0.3);
  const auto c = oracle::random_graph(3, 8, 0.3);
  const std::vector<FactRuleGraph> ab{a, b};
  const std::vector<FactRuleGraph> bc{b, c};
  const std::vector<FactRuleGraph> left{merge(ab), c};
  const std::vector<FactRuleGraph> right{a, merge(bc)};
  EXPECT_EQ(merge(left), merge(right));
}

TEST(Merge, PermutationInvariant) {
  std::vector<FactRuleGraph> gs;
  for (std::uint64_t s = 0; s < 6; ++s) gs.push_back(oracle::random_graph(s, 10, 0.25));
  const auto reference = merge(gs);
  std::mt19937 gen(5);
  for (int i = 0; i < 50; ++i) {
    std::shuffle(gs.begin(), gs.end(), gen);
    EXPECT_EQ(merge(gs), reference);
  }
}

TEST(NHop, OneStepOnChain) {
  const auto sub = n_hop_subgraph(chain(), {fact("a")}, 1);
  EXPECT_EQ(sub.nodes(), (std::set<NodeId>{fact("a"), fact("b")}));
  EXPECT_EQ(sub.edges().size(), 1u);
}

TEST(NHop, UndirectedTraversal) {
  const auto sub = n_hop_subgraph(chain(), {fact("d")}, 2);
  EXPECT_EQ(sub.nodes(), (std::set<NodeId>{fact("b"), fact("c"), fact("d")}));
}

TEST(NHop, SaturatesToComponent) {
  auto g = chain();
  g.add_edge(fact("x"), rule("y"), Relation::Violates);
  const auto sub = n_hop_subgraph(g, {fact("a")}, 10);
  EXPECT_EQ(sub.nodes().size(), 4u);
  EXPECT_FALSE(sub.contains(fact("x")));
}

TEST(NHop, Errors) {
  EXPECT_EQ(code_of([] { n_hop_subgraph(chain(), {fact("zz")}, 1); }), Errc::SeedNotInGraph);
  EXPECT_EQ(code_of([] { n_hop_subgraph(chain(), {fact("a")}, 0); }), Errc::InvalidArgument);
}

TEST(NHop, MatchesBfsOracleAndIsMonotone) {
  casediag::Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_nodes = 2 + static_cast<int>(rng.index(30));
    const auto g = oracle::random_graph(1000 + trial, n_nodes, 0.08);
    std::set<NodeId> seeds;
    const auto nodes = g.ordered_nodes();
    for (int k = 0; k < 2; ++k) seeds.insert(nodes[rng.index(nodes.size())]);
    for (int n = 1; n <= 4; ++n) {
      const auto sub = n_hop_subgraph(g, seeds, n);
      EXPECT_EQ(sub.nodes(), oracle::bfs_within(g, seeds, n));
      const auto wider = n_hop_subgraph(g, seeds, n + 1);
      EXPECT_TRUE(std::includes(wider.nodes().begin(), wider.nodes().end(), sub.nodes().begin(), sub.nodes().end()));
      for (const auto& e : g.edges()) {
        const bool induced = sub.contains(e.source) && sub.contains(e.target);
        EXPECT_EQ(sub.edges().contains(e), induced);
      }
    }
  }
}

TEST(CandidateFacts, SetDifference) {
  FactRuleGraph prime;
  prime.add_edge(fact("c"), fact("a"), Relation::DependsOn);
  prime.add_edge(fact("b"), rule("r"), Relation::Violates);
  FactRuleGraph masked(std::optional<std::string>("case-1"));
  masked.add_node(fact("a"));
  const auto f = candidate_facts(prime, masked);
  EXPECT_EQ(f.facts, (std::vector<NodeId>{fact("b"), fact("c")}));
  EXPECT_EQ(f.case_id, std::optional<std::string>("case-1"));
}

TEST(CandidateFacts, EqualGraphsGiveEmptySet) {
  const auto g = chain();
  EXPECT_TRUE(candidate_facts(g, g).facts.empty());
}

TEST(CandidateFacts, MaskMustBeSubset) {
  FactRuleGraph masked;
  masked.add_node(fact("zz"));
  EXPECT_EQ(code_of([&] { candidate_facts(chain(), masked); }), Errc::MaskNotSubset);
}

TEST(CandidateFacts, RecoversMaskedNodesOnConnectedGraphs) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    // Every fact hangs off one shared rule, so the case graph is connected
    // with eccentricity <= 2 from the rule.
    auto g = oracle::random_graph(seed, 10, 0.15);
    for (const auto& f : g.fact_nodes()) g.add_edge(f, rule("hub"), Relation::CompliesWith);
    if (g.fact_count() < 2) continue;
    const auto m = mask_graph(g, 0.3, seed);
    const auto other = oracle::random_graph(seed + 500, 10, 0.2);
    const std::vector<FactRuleGraph> all{g, other};
    const auto merged = merge(all);
    const auto prime = n_hop_subgraph(merged, m.masked.nodes(), 2);
    const auto f = candidate_facts(prime, m.masked);
    for (const auto& r : m.removed) {
      EXPECT_NE(std::find(f.facts.begin(), f.facts.end(), r), f.facts.end());
    }
    for (const auto& c : f.facts) {
      EXPECT_EQ(c.kind, NodeKind::Fact);
      EXPECT_FALSE(m.masked.contains(c));
    }
    EXPECT_TRUE(std::is_sorted(f.facts.begin(), f.facts.end()));
  }
}

TEST(GraphJson, RoundTrip) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto g = oracle::random_graph(seed, 12, 0.2);
    g.set_case_id("case-" + std::to_string(seed));
    EXPECT_EQ(parse_graph(serialize(g)), g);
  }
}

TEST(GraphJson, ParsesFileFormat) {
  const auto g = parse_graph(R"({"case_id": null, "facts": ["Alibi", "Witness"], "rules": ["Criminal Law"],
    "edges": [{"source": "Alibi", "target": "witness", "relation": "DependsOn"},
              {"source": "alibi", "target": "Criminal  Law", "relation": "Complies With"}]})");
  EXPECT_FALSE(g.case_id().has_value());
  EXPECT_EQ(g.nodes().size(), 3u);
  EXPECT_TRUE(g.edges().contains(Edge{fact("alibi"), rule("criminal law"), Relation::CompliesWith}));
}

TEST(GraphJson, MalformedReportsOffset) {
  try {
    parse_graph(R"({"facts": ["a", )");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ResponseParseError);
    EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
  }
}

}  // namespace
}  // namespace casediag
