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

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace casediag {

enum class NodeKind : std::uint8_t { Fact, Rule };

enum class Relation : std::uint8_t { DependsOn, CompliesWith, Violates };

std::string_view to_string(NodeKind kind) noexcept;
std::string_view to_string(Relation relation) noexcept;
Relation parse_relation(std::string_view s);

/// Canonical node identity: (label, kind). Construct through canonicalize().
struct NodeId {
  std::string label;
  NodeKind kind = NodeKind::Fact;

  auto operator<=>(const NodeId&) const = default;
  bool operator==(const NodeId&) const = default;
};

/// Trims, lower-cases and collapses whitespace. Throws EmptyLabel on blank input.
NodeId canonicalize(std::string_view raw_label, NodeKind kind);

inline NodeId fact(std::string_view label) { return canonicalize(label, NodeKind::Fact); }
inline NodeId rule(std::string_view label) { return canonicalize(label, NodeKind::Rule); }

struct Edge {
  NodeId source;
  NodeId target;
  Relation relation = Relation::DependsOn;

  auto operator<=>(const Edge&) const = default;
  bool operator==(const Edge&) const = default;
};

/// Typed directed fact-rule graph. Node and edge sets are ordered, so
/// iteration order is deterministic (lexicographic by label, then kind).
class FactRuleGraph {
 public:
  FactRuleGraph() = default;
  explicit FactRuleGraph(std::optional<std::string> case_id) : case_id_(std::move(case_id)) {}

  void add_node(const NodeId& node);
  // Endpoints are inserted when missing. Throws InvalidEdge on a self-loop or
  // a relation/kind mismatch (DependsOn is Fact->Fact, the others Fact->Rule).
  void add_edge(const Edge& edge);
  void add_edge(const NodeId& source, const NodeId& target, Relation relation) {
    add_edge(Edge{source, target, relation});
  }

  bool contains(const NodeId& node) const { return nodes_.contains(node); }
  const std::set<NodeId>& nodes() const { return nodes_; }
  const std::set<Edge>& edges() const { return edges_; }

  std::vector<NodeId> fact_nodes() const;
  std::vector<NodeId> rule_nodes() const;
  std::size_t fact_count() const;

  // Nodes in deterministic order; row index of a node in any per-graph matrix.
  std::vector<NodeId> ordered_nodes() const { return {nodes_.begin(), nodes_.end()}; }

  // Subgraph induced by `keep` (edges with both endpoints kept).
  FactRuleGraph induced(const std::set<NodeId>& keep) const;

  const std::optional<std::string>& case_id() const { return case_id_; }
  void set_case_id(std::optional<std::string> id) { case_id_ = std::move(id); }

  // Structural equality ignores the case id.
  bool same_structure(const FactRuleGraph& other) const {
    return nodes_ == other.nodes_ && edges_ == other.edges_;
  }
  bool operator==(const FactRuleGraph& other) const = default;

 private:
  std::set<NodeId> nodes_;
  std::set<Edge> edges_;
  std::optional<std::string> case_id_;
};

struct MaskResult {
  FactRuleGraph masked;
  std::set<NodeId> removed;
};

/// Removes ceil(ratio * facts) fact nodes (at least one, never all) together
/// with their incident edges. Rule nodes are never removed.
MaskResult mask_graph(const FactRuleGraph& g, double ratio, std::uint64_t seed);

/// Node/edge set union. Order-independent and idempotent; the result carries no case id.
FactRuleGraph merge(std::span<const FactRuleGraph> graphs);

/// Nodes within undirected distance <= n of any seed, with induced edges.
FactRuleGraph n_hop_subgraph(const FactRuleGraph& g, const std::set<NodeId>& seeds, int n);

struct CandidateFactSet {
  std::optional<std::string> case_id;
  std::vector<NodeId> facts;  // lexicographic by label

  bool operator==(const CandidateFactSet&) const = default;
};

/// Fact nodes of `g_prime` absent from `g_masked`.
CandidateFactSet candidate_facts(const FactRuleGraph& g_prime, const FactRuleGraph& g_masked);

// JSON file format: {"case_id", "facts", "rules", "edges": [{source,target,relation}]}.
nlohmann::json to_json(const FactRuleGraph& g);
FactRuleGraph graph_from_json(const nlohmann::json& j);
std::string serialize(const FactRuleGraph& g);
FactRuleGraph parse_graph(std::string_view text);

}  // namespace casediag
