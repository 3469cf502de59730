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

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "casediag/error.hpp"
#include "casediag/pu_train.hpp"
#include "casediag/rng.hpp"

namespace casediag {
namespace {

constexpr int kDim = 8;

PuArchitecture small_arch() {
  PuArchitecture a;
  a.dim = kDim;
  a.conv_layers = 2;
  a.mlp_hidden = {16, 16, 16, 16, 16};
  return a;
}

// Each case scores `n_pos` relevant labels and `n_neg` irrelevant ones drawn
// from fixed pools. A relevant label is observed (masked, hence positive) with
// probability `label_rate`; the rest stay unlabeled. Truth is recorded.
std::vector<PuBatch> pu_task(std::uint64_t seed, int n_cases, double label_rate, int n_pos = 5, int n_neg = 7) {
  Rng rng(seed);
  std::vector<PuBatch> out;
  for (int c = 0; c < n_cases; ++c) {
    FactRuleGraph g;
    std::vector<NodeId> candidates;
    std::set<NodeId> masked;
    std::vector<std::int8_t> truth;
    const auto anchor = fact("anchor " + std::to_string(c % 3));
    g.add_node(anchor);
    for (int k = 0; k < n_pos; ++k) {
      auto n = fact("relevant " + std::to_string(rng.index(12)));
      if (std::find(candidates.begin(), candidates.end(), n) != candidates.end()) continue;
      g.add_edge(n, anchor, Relation::DependsOn);
      candidates.push_back(n);
      truth.push_back(1);
      if (rng.uniform01() < label_rate) masked.insert(n);
    }
    if (masked.empty()) masked.insert(candidates.front());
    for (int k = 0; k < n_neg; ++k) {
      auto n = fact("noise " + std::to_string(rng.index(16)));
      if (std::find(candidates.begin(), candidates.end(), n) != candidates.end()) continue;
      g.add_edge(anchor, n, Relation::DependsOn);
      candidates.push_back(n);
      truth.push_back(0);
    }
    Vector text = Vector::NullaryExpr(kDim, [&] { return rng.normal(); }).normalized();
    // make_pu_batch follows candidate order, so truth stays aligned.
    auto b = make_pu_batch("case" + std::to_string(c), g, candidates, masked, text);
    b.truth = truth;
    out.push_back(std::move(b));
  }
  return out;
}

double f1_on(const PuModel& model, const std::vector<PuBatch>& batches) {
  double tp = 0, fp = 0, fn = 0;
  for (const auto& b : batches) {
    const Vector p = model.probabilities(b.input);
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      const bool predicted = p[j] >= 0.5;
      const bool actual = b.truth[static_cast<std::size_t>(j)] != 0;
      tp += predicted && actual;
      fp += predicted && !actual;
      fn += !predicted && actual;
    }
  }
  return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

TEST(TrainingConfig, Validation) {
  TrainingConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.discount = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.discount = 1.0;
  cfg.step_size = -1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.step_size = 1e-3;
  cfg.global_prior = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(TrainDomainPu, RejectsCasesWithoutUnlabeledNodes) {
  auto batches = pu_task(1, 2, 0.5);
  batches[0].positive.insert(batches[0].positive.end(), batches[0].unlabeled.begin(), batches[0].unlabeled.end());
  batches[0].unlabeled.clear();
  TrainingConfig cfg;
  cfg.arch = small_arch();
  cfg.epochs = 1;
  EXPECT_THROW(train_domain_pu(batches, cfg), Error);
}

TEST(TrainDomainPu, SeparableClustersReachHighF1) {
  // Relevant labels start in one embedding cluster, noise labels in another,
  // and every relevant candidate is observed.
  auto train = pu_task(11, 30, 1.0);
  auto test = pu_task(12, 10, 1.0);
  TrainingConfig cfg;
  cfg.arch = small_arch();
  cfg.epochs = 30;
  cfg.step_size = 5e-3;
  cfg.seed = 3;
  auto model = PuModel::initialize(cfg.arch, cfg.seed);
  Rng rng(99);
  for (const auto& batches : {train, test}) {
    for (const auto& b : batches) model.register_nodes(b.input.nodes);
  }
  for (auto& [node, row] : model.params().node_rows) {
    const double centre = node.label.rfind("relevant", 0) == 0 ? 0.5 : -0.5;
    for (Eigen::Index i = 0; i < row.size(); ++i) row[i] = centre * (i % 2 == 0 ? 1.0 : -1.0) + 0.05 * rng.normal();
  }
  for (auto& b : train) b.prior = empirical_prior(b);
  const auto result = train_domain_pu(train, cfg, model);
  EXPECT_GE(f1_on(result.model, test), 0.9);
}

TEST(TrainDomainPu, RiskNonNegativeAndFlagMatchesInnerSign) {
  auto batches = pu_task(21, 12, 0.3);
  for (auto& b : batches) b.prior = empirical_prior(b);
  TrainingConfig cfg;
  cfg.arch = small_arch();
  cfg.epochs = 25;
  cfg.step_size = 1e-2;
  const auto result = train_domain_pu(batches, cfg);
  int corrections = 0;
  for (const auto& s : result.steps) {
    EXPECT_GE(s.risk, 0.0);
    EXPECT_EQ(s.used_correction, s.inner < 0.0);
    EXPECT_DOUBLE_EQ(s.step_size, s.used_correction ? cfg.discount * cfg.step_size : cfg.step_size);
    corrections += s.used_correction;
  }
  EXPECT_GT(corrections, 0) << "the task should exercise the correction branch";
  EXPECT_EQ(result.epoch_risk.size(), 25u);
}

TEST(TrainDomainPu, DeterministicTrace) {
  auto batches = pu_task(5, 6, 0.5);
  TrainingConfig cfg;
  cfg.arch = small_arch();
  cfg.epochs = 5;
  cfg.step_size = 1e-3;
  cfg.seed = 77;
  const auto a = train_domain_pu(batches, cfg);
  const auto b = train_domain_pu(batches, cfg);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].risk, b.steps[i].risk);
  EXPECT_EQ(a.model.to_json(), b.model.to_json());
}

TEST(TrainDomainPu, UnitDiscountWithoutCorrectionEqualsUnbiasedErm) {
  auto batches = pu_task(8, 8, 0.6);
  TrainingConfig cfg;
  cfg.arch = small_arch();
  cfg.epochs = 6;
  cfg.step_size = 1e-4;
  cfg.discount = 1.0;
  cfg.global_prior = 0.1;
  cfg.objective = PuObjective::NonNegative;
  const auto nn = train_domain_pu(batches, cfg);
  cfg.objective = PuObjective::Unbiased;
  const auto erm = train_domain_pu(batches, cfg);
  for (const auto& s : nn.steps) ASSERT_FALSE(s.used_correction);
  ASSERT_EQ(nn.steps.size(), erm.steps.size());
  for (std::size_t i = 0; i < nn.steps.size(); ++i) EXPECT_EQ(nn.steps[i].risk, erm.steps[i].risk);
  EXPECT_EQ(nn.model.to_json(), erm.model.to_json());
}

TEST(TrainDomainPu, PuBeatsPositiveNegativeWithHiddenPositives) {
  auto train = pu_task(31, 40, 0.3);
  auto test = pu_task(32, 15, 0.3);
  for (auto& b : train) b.prior = empirical_prior(b);
  TrainingConfig cfg;
  cfg.arch = small_arch();
  cfg.epochs = 40;
  cfg.step_size = 3e-3;
  cfg.seed = 4;
  const auto pu = train_domain_pu(train, cfg);
  cfg.objective = PuObjective::PositiveNegative;
  const auto pn = train_domain_pu(train, cfg);
  const double f1_pu = f1_on(pu.model, test);
  const double f1_pn = f1_on(pn.model, test);
  EXPECT_GT(f1_pu, f1_pn + 0.15) << "PU " << f1_pu << " PN " << f1_pn;
}

TEST(AdamOptimizer, MovesAgainstGradient) {
  auto model = PuModel::initialize(small_arch(), 1);
  auto grad = model.params().zeros_like();
  grad.att_b = 1.0;
  const double before = model.params().att_b;
  AdamOptimizer adam(0.9, 0.999, 1e-8);
  adam.step(model.params(), grad, 0.01);
  EXPECT_NEAR(model.params().att_b, before - 0.01, 1e-9);
  EXPECT_EQ(adam.steps(), 1);
}

}  // namespace
}  // namespace casediag
