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
#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "casediag/error.hpp"
#include "casediag/pu_model.hpp"
#include "casediag/rng.hpp"
#include "gradient_check.hpp"
#include "oracles.hpp"

namespace casediag {
namespace {

PuParams tiny_params(int d, int layers) {
  PuArchitecture arch;
  arch.dim = d;
  arch.conv_layers = layers;
  arch.mlp_hidden = {4, 4, 4, 4, 4};
  return PuModel::initialize(arch, 3).params();
}

TEST(GraphConv, NoEdgesIdentityWeightsIsRelu) {
  auto p = tiny_params(3, 2);
  for (auto& w : p.conv_w) w = Matrix::Identity(3, 3);
  for (auto& b : p.conv_b) b.setZero();
  FactRuleGraph g;
  for (auto l : {"x", "y", "z"}) g.add_node(fact(l));
  const auto adj = normalized_adjacency(g, g.ordered_nodes());
  EXPECT_EQ(adj, Matrix::Identity(3, 3));
  Matrix h0(3, 3);
  h0 << 1, -2, 3, -4, 5, -6, 0.5, 0.25, -0.125;
  EXPECT_EQ(graph_conv_forward(adj, h0, p), h0.cwiseMax(0.0));
}

TEST(GraphConv, SingleNodeAdjacencyIsOne) {
  FactRuleGraph g;
  g.add_node(fact("solo"));
  const auto adj = normalized_adjacency(g, g.ordered_nodes());
  ASSERT_EQ(adj.rows(), 1);
  EXPECT_EQ(adj(0, 0), 1.0);
}

TEST(GraphConv, ThreeNodeHandCase) {
  // a->b, a->c, b->c with self loops, rows divided by out-degree + 1.
  FactRuleGraph g;
  g.add_edge(fact("a"), fact("b"), Relation::DependsOn);
  g.add_edge(fact("a"), fact("c"), Relation::DependsOn);
  g.add_edge(fact("b"), fact("c"), Relation::DependsOn);
  const auto adj = normalized_adjacency(g, g.ordered_nodes());
  Matrix expected_adj(3, 3);
  expected_adj << 1.0 / 3, 1.0 / 3, 1.0 / 3, 0, 0.5, 0.5, 0, 0, 1;
  EXPECT_LT((adj - expected_adj).cwiseAbs().maxCoeff(), 1e-15);

  auto p = tiny_params(2, 1);
  p.conv_w[0] << 1, 2, 0, 1;
  p.conv_b[0] << -0.7, -0.2;
  Matrix h0(3, 2);
  h0 << 1, 0, 0, 1, 1, 1;
  // A h0 = [[2/3, 2/3], [1/2, 1], [1, 1]]; times W gives [x, 2x + y].
  Matrix expected(3, 2);
  // Bias (-0.7, -0.2); the first column of rows a and b goes negative and is clipped.
  expected << 0.0, 1.8, 0.0, 1.8, 0.3, 2.8;
  EXPECT_LT((graph_conv_forward(adj, h0, p) - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(GraphConv, DimensionMismatch) {
  auto p = tiny_params(3, 1);
  EXPECT_THROW(graph_conv_forward(Matrix::Identity(2, 2), Matrix::Zero(3, 3), p), Error);
  EXPECT_THROW(graph_conv_forward(Matrix::Identity(2, 2), Matrix::Zero(2, 4), p), Error);
}

TEST(NodeAttention, SingleNode) {
  auto p = tiny_params(3, 1);
  Matrix rows(1, 3);
  rows << 0.3, -0.1, 0.7;
  const auto r = node_attention(Vector::Ones(3), rows, p);
  EXPECT_EQ(r.alpha.size(), 1);
  EXPECT_DOUBLE_EQ(r.alpha[0], 1.0);
  EXPECT_LT((r.z - rows.row(0).transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(NodeAttention, IdenticalRowsSplitEvenly) {
  auto p = tiny_params(3, 1);
  Matrix rows(2, 3);
  rows << 0.2, 0.4, 0.6, 0.2, 0.4, 0.6;
  const auto r = node_attention(Vector::Ones(3).normalized(), rows, p);
  EXPECT_DOUBLE_EQ(r.alpha[0], 0.5);
  EXPECT_DOUBLE_EQ(r.alpha[1], 0.5);
}

TEST(NodeAttention, EmptyNodeSet) {
  auto p = tiny_params(3, 1);
  try {
    node_attention(Vector::Ones(3), Matrix(0, 3), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyNodeSet);
  }
}

TEST(NodeAttention, MatchesScalarOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(8));
    const int m = 1 + static_cast<int>(rng.index(6));
    auto p = tiny_params(d, 1);
    for (Eigen::Index i = 0; i < p.att_w.size(); ++i) p.att_w[i] = rng.uniform(-2, 2);
    p.att_b = rng.uniform(-1, 1);
    Vector text(d);
    Matrix rows(m, d);
    std::vector<double> text_v(static_cast<std::size_t>(d));
    std::vector<std::vector<double>> rows_v(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(d)));
    for (int k = 0; k < d; ++k) text_v[static_cast<std::size_t>(k)] = text[k] = rng.uniform(-1, 1);
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < d; ++k) rows_v[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = rows(j, k) = rng.uniform(-1, 1);
    }
    const std::vector<double> w(p.att_w.data(), p.att_w.data() + p.att_w.size());
    const auto expected = oracle::attention_weights(text_v, rows_v, w, p.att_b);
    const auto r = node_attention(text, rows, p);
    double sum = 0.0;
    for (int j = 0; j < m; ++j) {
      EXPECT_NEAR(r.alpha[j], expected[static_cast<std::size_t>(j)], 1e-9);
      sum += r.alpha[j];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    for (int k = 0; k < d; ++k) {
      double zk = 0.0;
      for (int j = 0; j < m; ++j) zk += expected[static_cast<std::size_t>(j)] * rows(j, k);
      EXPECT_NEAR(r.z[k], zk, 1e-9);
    }
  }
}

TEST(Score, ZeroHeadGivesHalf) {
  auto p = tiny_params(3, 1);
  for (auto& w : p.mlp_w) w.setZero();
  for (auto& b : p.mlp_b) b.setZero();
  EXPECT_DOUBLE_EQ(score(Vector::Ones(3), Vector::Ones(3), p), 0.5);
}

TEST(Score, StrictlyInsideUnitInterval) {
  auto p = tiny_params(3, 1);
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    Vector row = Vector::NullaryExpr(3, [&] { return rng.uniform(-50, 50); });
    Vector z = Vector::NullaryExpr(3, [&] { return rng.uniform(-50, 50); });
    const double s = score(row, z, p);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
  EXPECT_GT(probability_from_logit(-800.0), 0.0);
  EXPECT_LT(probability_from_logit(800.0), 1.0);
}

TEST(Score, MonotoneInFinalBias) {
  auto p = tiny_params(3, 1);
  const Vector row = Vector::Constant(3, 0.2);
  const Vector z = Vector::Constant(3, -0.1);
  const double before = score(row, z, p);
  p.mlp_b.back()[0] += 0.75;
  EXPECT_GT(score(row, z, p), before);
}

TEST(Score, DimensionMismatch) {
  auto p = tiny_params(3, 1);
  EXPECT_THROW(score(Vector::Ones(2), Vector::Ones(3), p), Error);
}

TEST(PuModel, ScoresPermuteWithCandidates) {
  auto inst = gradcheck::random_instance(5);
  auto& in = inst.batch.input;
  const Vector probs = inst.model.probabilities(in);
  auto reversed = in;
  std::reverse(reversed.scored.begin(), reversed.scored.end());
  const Vector rprobs = inst.model.probabilities(reversed);
  for (Eigen::Index j = 0; j < probs.size(); ++j) EXPECT_NEAR(probs[j], rprobs[probs.size() - 1 - j], 1e-12);
}

TEST(PuModel, AttentionSumsToOneOnEveryForward) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto inst = gradcheck::random_instance(s);
    const auto cache = inst.model.forward(inst.batch.input);
    EXPECT_NEAR(cache.attention.alpha.sum(), 1.0, 1e-9);
  }
}

TEST(PuModel, CheckpointRoundTrip) {
  auto inst = gradcheck::random_instance(9);
  const auto j = inst.model.to_json();
  EXPECT_EQ(j.at("version"), 1);
  const auto restored = PuModel::from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(restored.probabilities(inst.batch.input), inst.model.probabilities(inst.batch.input));
  auto broken = j;
  broken.erase("version");
  EXPECT_THROW(PuModel::from_json(broken), Error);
}

TEST(NnpuRisk, HandExample) {
  const std::vector<double> pos{0.0};
  const std::vector<double> unl{0.0};
  const auto r = nnpu_risk(pos, unl, 0.5);
  EXPECT_DOUBLE_EQ(r.risk, 0.5);
  EXPECT_FALSE(r.used_correction);
}

TEST(NnpuRisk, MatchesOracleAndFlagsCorrection) {
  Rng rng(4242);
  int corrected = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> pos(1 + rng.index(4));
    std::vector<double> unl(1 + rng.index(6));
    for (auto& z : pos) z = rng.uniform(-6, 6);
    for (auto& z : unl) z = rng.uniform(-6, 6);
    const double prior = rng.uniform(0.05, 0.95);
    bool clipped = false;
    const double expected = oracle::nnpu_risk(pos, unl, prior, &clipped);
    const auto r = nnpu_risk(pos, unl, prior);
    EXPECT_NEAR(r.risk, expected, 1e-9);
    EXPECT_GE(r.risk, 0.0);
    EXPECT_EQ(r.used_correction, clipped);
    EXPECT_EQ(r.used_correction, r.inner < 0.0);
    corrected += r.used_correction;
  }
  EXPECT_GT(corrected, 0);
}

TEST(Gradients, MatchFiniteDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 25; ++seed) {
    auto inst = gradcheck::random_instance(seed);
    if (gradcheck::kink_margin(inst) < 1e-4) continue;
    for (const auto& g : gradcheck::compare(inst)) {
      EXPECT_LT(g.relative_error, 1e-4) << "seed " << seed << " group " << g.group;
    }
    ++checked;
  }
}

}  // namespace
}  // namespace casediag
