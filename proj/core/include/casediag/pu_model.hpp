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
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "casediag/embedding.hpp"
#include "casediag/graph.hpp"

namespace casediag {

struct PuArchitecture {
  int dim = kDefaultEmbeddingDim;
  int conv_layers = 2;
  // Hidden widths of the probability head; the head has hidden.size() + 1
  // linear layers. Empty means five hidden layers of width 2 * dim.
  std::vector<int> mlp_hidden;

  std::vector<int> head_widths() const;  // input 2d, hidden..., output 1
};

/// All trainable tensors of the domain scorer. Gradients use the same type;
/// a gradient's node_rows only holds rows that received signal.
struct PuParams {
  std::vector<Matrix> conv_w;  // d x d
  std::vector<Vector> conv_b;  // d
  Vector att_w;                // 2d: [text part, node part]
  double att_b = 0.0;
  std::vector<Matrix> mlp_w;   // out x in
  std::vector<Vector> mlp_b;
  Vector known_row;            // d, added to the input row of nodes the case already contains
  std::map<NodeId, Vector> node_rows;

  PuParams zeros_like() const;  // dense tensors zeroed, node_rows empty
};

/// One case as seen by the scorer: case text embedding, the subgraph's nodes
/// with their normalized adjacency, and which rows are scored.
struct PuInput {
  Vector text;
  std::vector<NodeId> nodes;
  Matrix adjacency;         // (D_out + I)^-1 (A + I), rows follow `nodes`
  std::vector<int> scored;  // row indices into `nodes`
  std::vector<std::int8_t> known;  // per node; empty when no node is known
};

/// Labeled case for PU training. `positive` and `unlabeled` index into
/// input.scored and partition it.
struct PuBatch {
  std::string case_id;
  PuInput input;
  std::vector<int> positive;
  std::vector<int> unlabeled;
  double prior = 0.5;
  // Ground-truth relevance per scored position when known (synthetic data);
  // used for evaluation only, never by the training objective.
  std::vector<std::int8_t> truth;
};

Matrix normalized_adjacency(const FactRuleGraph& g, const std::vector<NodeId>& order);

/// Builds the scorer input over `g_prime`, scoring `candidates` in order.
/// `known` lists the nodes of the (masked) case graph; they receive the known-row offset.
PuInput make_pu_input(const FactRuleGraph& g_prime, const std::vector<NodeId>& candidates, Vector text,
                      const std::set<NodeId>& known = {});

/// Builds a batch; positives are the candidates listed in `masked`.
PuBatch make_pu_batch(std::string case_id, const FactRuleGraph& g_prime,
                      const std::vector<NodeId>& candidates, const std::set<NodeId>& masked, Vector text,
                      const std::set<NodeId>& known = {});

struct AttentionResult {
  Vector pre;    // W . [h, H_j] + b before the relu
  Vector alpha;  // softmax of relu(pre)
  Vector z;      // sum_j alpha_j H_j
};

Matrix graph_conv_forward(const Matrix& adjacency, const Matrix& h0, const PuParams& params);
AttentionResult node_attention(const Vector& text, const Matrix& rows, const PuParams& params);
double score_logit(const Vector& node_row, const Vector& z, const PuParams& params);
double score(const Vector& node_row, const Vector& z, const PuParams& params);

struct ForwardCache {
  std::vector<Matrix> hidden;    // H_0 .. H_L
  std::vector<Matrix> propagated;  // A H_l
  std::vector<Matrix> preact;    // A H_l W_l + b_l
  Matrix scored_rows;            // m x d
  AttentionResult attention;
  std::vector<Matrix> head_act;  // inputs to each head layer (rows = m)
  std::vector<Matrix> head_pre;  // pre-activations of each head layer
  Vector logits;                 // m
  Vector probabilities;          // m
};

class PuModel {
 public:
  PuModel() = default;
  static PuModel initialize(const PuArchitecture& arch, std::uint64_t seed);

  const PuArchitecture& architecture() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  int dim() const { return arch_.dim; }
  PuParams& params() { return params_; }
  const PuParams& params() const { return params_; }

  // Adds label-keyed initial rows for nodes the table has not seen yet.
  void register_nodes(std::span<const NodeId> nodes);
  Vector node_row(const NodeId& node) const;
  Matrix initial_rows(const std::vector<NodeId>& nodes) const;

  ForwardCache forward(const PuInput& input) const;
  // Gradient of sum_j dlogits[j] * logit_j with respect to every parameter.
  PuParams backward(const PuInput& input, const ForwardCache& cache, const Vector& dlogits) const;
  Vector probabilities(const PuInput& input) const { return forward(input).probabilities; }

  nlohmann::json to_json() const;
  static PuModel from_json(const nlohmann::json& j);

 private:
  PuArchitecture arch_;
  PuParams params_;
  std::uint64_t seed_ = 0;
};

/// nnPU risk on pre-squash logits with the sigmoid surrogate
/// l(z,+1) = sigmoid(-z), l(z,-1) = sigmoid(z).
struct PuRisk {
  double risk = 0.0;
  double inner = 0.0;     // R_u^- - prior * R_p^-, before clipping
  bool used_correction = false;
  double positive_risk = 0.0;       // R_p^+
  double positive_as_negative = 0.0;  // R_p^-
  double unlabeled_as_negative = 0.0; // R_u^-
};

PuRisk nnpu_risk(std::span<const double> positive_logits, std::span<const double> unlabeled_logits,
                 double prior);
PuRisk nnpu_risk(const PuBatch& batch, const PuModel& model, double prior);

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Logistic squash kept inside the open unit interval even when the logit
// saturates double precision.
inline double probability_from_logit(double z) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return std::clamp(sigmoid(z), lo, hi);
}

/// Flat views used by optimizers and finite-difference checks. Blocks are
/// visited in a fixed order; node rows in NodeId order.
template <typename Params, typename F>
void for_each_block(Params& p, F&& f) {
  for (auto& w : p.conv_w) f(w.data(), w.size());
  for (auto& b : p.conv_b) f(b.data(), b.size());
  f(p.att_w.data(), p.att_w.size());
  f(&p.att_b, Eigen::Index{1});
  for (auto& w : p.mlp_w) f(w.data(), w.size());
  for (auto& b : p.mlp_b) f(b.data(), b.size());
  f(p.known_row.data(), p.known_row.size());
  for (auto& [node, row] : p.node_rows) f(row.data(), row.size());
}

}  // namespace casediag
