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

#include "casediag/graph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <map>

#include <nlohmann/json.hpp>

#include "casediag/error.hpp"
#include "casediag/rng.hpp"
#include "casediag/text.hpp"

namespace casediag {

std::string_view to_string(NodeKind kind) noexcept {
  return kind == NodeKind::Fact ? "Fact" : "Rule";
}

std::string_view to_string(Relation relation) noexcept {
  switch (relation) {
    case Relation::DependsOn: return "DependsOn";
    case Relation::CompliesWith: return "CompliesWith";
    case Relation::Violates: return "Violates";
  }
  return "DependsOn";
}

Relation parse_relation(std::string_view s) {
  // Accepts the file spelling and the spaced spelling LLMs tend to produce.
  std::string key;
  for (char c : s) {
    if (c != ' ' && c != '_' && c != '-') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "dependson") return Relation::DependsOn;
  if (key == "complieswith") return Relation::CompliesWith;
  if (key == "violates") return Relation::Violates;
  throw Error(Errc::InvalidArgument, "unknown relation '" + std::string(s) + "'");
}

NodeId canonicalize(std::string_view raw_label, NodeKind kind) {
  auto label = text::normalize_label(raw_label);
  if (label.empty()) throw Error(Errc::EmptyLabel, "label is empty after trimming");
  return NodeId{std::move(label), kind};
}

void FactRuleGraph::add_node(const NodeId& node) {
  if (node.label.empty()) throw Error(Errc::EmptyLabel, "node label is empty");
  nodes_.insert(node);
}

void FactRuleGraph::add_edge(const Edge& edge) {
  if (edge.source == edge.target) {
    throw Error(Errc::InvalidEdge, "self-loop on '" + edge.source.label + "'");
  }
  if (edge.source.kind != NodeKind::Fact) {
    throw Error(Errc::InvalidEdge, "edge source '" + edge.source.label + "' is not a fact");
  }
  const NodeKind expected =
      edge.relation == Relation::DependsOn ? NodeKind::Fact : NodeKind::Rule;
  if (edge.target.kind != expected) {
    throw Error(Errc::InvalidEdge, std::string(to_string(edge.relation)) + " edge to '" +
                                       edge.target.label + "' needs a " +
                                       std::string(to_string(expected)) + " target");
  }
  add_node(edge.source);
  add_node(edge.target);
  edges_.insert(edge);
}

std::vector<NodeId> FactRuleGraph::fact_nodes() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.kind == NodeKind::Fact) out.push_back(n);
  }
  return out;
}

std::vector<NodeId> FactRuleGraph::rule_nodes() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.kind == NodeKind::Rule) out.push_back(n);
  }
  return out;
}

std::size_t FactRuleGraph::fact_count() const {
  return static_cast<std::size_t>(std::count_if(
      nodes_.begin(), nodes_.end(), [](const NodeId& n) { return n.kind == NodeKind::Fact; }));
}

FactRuleGraph FactRuleGraph::induced(const std::set<NodeId>& keep) const {
  FactRuleGraph out(case_id_);
  for (const auto& n : nodes_) {
    if (keep.contains(n)) out.nodes_.insert(n);
  }
  for (const auto& e : edges_) {
    if (out.nodes_.contains(e.source) && out.nodes_.contains(e.target)) out.edges_.insert(e);
  }
  return out;
}

MaskResult mask_graph(const FactRuleGraph& g, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(Errc::InvalidArgument, "mask ratio must lie in (0, 1)");
  }
  auto facts = g.fact_nodes();
  const std::size_t n = facts.size();
  if (n < 2) {
    throw Error(Errc::TooFewFacts, "masking needs at least 2 fact nodes, graph has " +
                                       std::to_string(n));
  }
  auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-12));
  k = std::clamp<std::size_t>(k, 1, n - 1);

  // Partial Fisher-Yates over the lexicographically ordered facts.
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(facts[i], facts[j]);
  }
  MaskResult result;
  result.removed.insert(facts.begin(), facts.begin() + static_cast<std::ptrdiff_t>(k));
  std::set<NodeId> keep;
  for (const auto& node : g.nodes()) {
    if (!result.removed.contains(node)) keep.insert(node);
  }
  result.masked = g.induced(keep);
  return result;
}

FactRuleGraph merge(std::span<const FactRuleGraph> graphs) {
  FactRuleGraph out;
  for (const auto& g : graphs) {
    for (const auto& n : g.nodes()) out.add_node(n);
    for (const auto& e : g.edges()) out.add_edge(e);
  }
  return out;
}

FactRuleGraph n_hop_subgraph(const FactRuleGraph& g, const std::set<NodeId>& seeds, int n) {
  if (n < 1) throw Error(Errc::InvalidArgument, "hop count must be positive");
  std::map<NodeId, std::vector<const NodeId*>> adjacency;
  for (const auto& e : g.edges()) {
    adjacency[e.source].push_back(&e.target);
    adjacency[e.target].push_back(&e.source);
  }
  std::map<NodeId, int> depth;
  std::deque<NodeId> frontier;
  for (const auto& s : seeds) {
    if (!g.contains(s)) {
      throw Error(Errc::SeedNotInGraph, "seed '" + s.label + "' is not in the graph");
    }
    if (depth.emplace(s, 0).second) frontier.push_back(s);
  }
  while (!frontier.empty()) {
    const NodeId current = std::move(frontier.front());
    frontier.pop_front();
    const int d = depth.at(current);
    if (d == n) continue;
    auto it = adjacency.find(current);
    if (it == adjacency.end()) continue;
    for (const NodeId* next : it->second) {
      if (depth.emplace(*next, d + 1).second) frontier.push_back(*next);
    }
  }
  std::set<NodeId> keep;
  for (const auto& [node, _] : depth) keep.insert(node);
  auto out = g.induced(keep);
  out.set_case_id(std::nullopt);
  return out;
}

CandidateFactSet candidate_facts(const FactRuleGraph& g_prime, const FactRuleGraph& g_masked) {
  for (const auto& n : g_masked.nodes()) {
    if (!g_prime.contains(n)) {
      throw Error(Errc::MaskNotSubset, "masked-graph node '" + n.label + "' missing from subgraph");
    }
  }
  CandidateFactSet out;
  out.case_id = g_masked.case_id();
  for (const auto& n : g_prime.nodes()) {
    if (n.kind == NodeKind::Fact && !g_masked.contains(n)) out.facts.push_back(n);
  }
  return out;
}

nlohmann::json to_json(const FactRuleGraph& g) {
  nlohmann::json j;
  j["case_id"] = g.case_id() ? nlohmann::json(*g.case_id()) : nlohmann::json(nullptr);
  auto facts = nlohmann::json::array();
  auto rules = nlohmann::json::array();
  for (const auto& n : g.nodes()) (n.kind == NodeKind::Fact ? facts : rules).push_back(n.label);
  j["facts"] = std::move(facts);
  j["rules"] = std::move(rules);
  auto edges = nlohmann::json::array();
  for (const auto& e : g.edges()) {
    edges.push_back({{"source", e.source.label},
                     {"target", e.target.label},
                     {"relation", std::string(to_string(e.relation))}});
  }
  j["edges"] = std::move(edges);
  return j;
}

FactRuleGraph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::ResponseParseError, "graph must be a JSON object");
  FactRuleGraph g;
  if (j.contains("case_id") && j["case_id"].is_string()) g.set_case_id(j["case_id"].get<std::string>());
  std::set<std::string> fact_labels;
  std::set<std::string> rule_labels;
  auto read_list = [&](const char* key, NodeKind kind, std::set<std::string>& into) {
    if (!j.contains(key)) return;
    if (!j[key].is_array()) throw Error(Errc::ResponseParseError, std::string("'") + key + "' must be a list");
    for (const auto& item : j[key]) {
      if (!item.is_string()) throw Error(Errc::ResponseParseError, std::string("'") + key + "' entries must be strings");
      auto node = canonicalize(item.get<std::string>(), kind);
      into.insert(node.label);
      g.add_node(node);
    }
  };
  read_list("facts", NodeKind::Fact, fact_labels);
  read_list("rules", NodeKind::Rule, rule_labels);
  if (j.contains("edges")) {
    if (!j["edges"].is_array()) throw Error(Errc::ResponseParseError, "'edges' must be a list");
    for (const auto& e : j["edges"]) {
      if (!e.is_object() || !e.contains("source") || !e.contains("target") || !e.contains("relation")) {
        throw Error(Errc::ResponseParseError, "edge needs source, target and relation");
      }
      const auto relation = parse_relation(e["relation"].get<std::string>());
      auto source = fact(e["source"].get<std::string>());
      auto target_label = text::normalize_label(e["target"].get<std::string>());
      NodeKind target_kind = relation == Relation::DependsOn ? NodeKind::Fact : NodeKind::Rule;
      g.add_edge(source, canonicalize(target_label, target_kind), relation);
    }
  }
  return g;
}

std::string serialize(const FactRuleGraph& g) { return to_json(g).dump(); }

FactRuleGraph parse_graph(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ResponseParseError,
                "graph JSON malformed at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return graph_from_json(j);
}

}  // namespace casediag
