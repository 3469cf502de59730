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

// Central finite differences of the clipped PU risk, compared against the
// analytic gradient group by group.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "casediag/pu_model.hpp"
#include "casediag/pu_train.hpp"
#include "casediag/rng.hpp"

namespace gradcheck {

struct Instance {
  casediag::PuModel model;
  casediag::PuBatch batch;
  double prior = 0.5;
};

// Random scorer and batch with d <= 8 and at most 5 nodes.
inline Instance random_instance(std::uint64_t seed) {
  using namespace casediag;
  Rng rng(seed);
  const int d = 2 + static_cast<int>(rng.index(7));
  const int n_nodes = 2 + static_cast<int>(rng.index(4));
  PuArchitecture arch;
  arch.dim = d;
  arch.conv_layers = 1 + static_cast<int>(rng.index(2));
  arch.mlp_hidden = {3 + static_cast<int>(rng.index(4)), 4, 3, 5, 4};
  Instance inst;
  inst.model = PuModel::initialize(arch, seed);

  FactRuleGraph g;
  std::vector<NodeId> nodes;
  for (int i = 0; i < n_nodes; ++i) {
    nodes.push_back(fact("n" + std::to_string(i)));
    g.add_node(nodes.back());
  }
  for (int i = 0; i < n_nodes; ++i) {
    for (int j = 0; j < n_nodes; ++j) {
      if (i != j && rng.uniform01() < 0.35) g.add_edge(nodes[static_cast<std::size_t>(i)], nodes[static_cast<std::size_t>(j)], Relation::DependsOn);
    }
  }
  inst.model.register_nodes(nodes);
  auto& p = inst.model.params();
  for_each_block(p, [&](double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) data[i] = rng.uniform(-1.0, 1.0);
  });
  Vector text(d);
  for (int i = 0; i < d; ++i) text[i] = rng.normal();
  text.normalize();

  // Score every node; at least one positive and one unlabeled.
  std::set<NodeId> masked;
  for (int i = 0; i < n_nodes; ++i) {
    if (i == 0 || (i != n_nodes - 1 && rng.uniform01() < 0.4)) masked.insert(nodes[static_cast<std::size_t>(i)]);
  }
  std::set<NodeId> known;
  for (const auto& node : nodes) {
    if (rng.uniform01() < 0.4) known.insert(node);
  }
  inst.batch = make_pu_batch("g" + std::to_string(seed), g, nodes, masked, text, known);
  inst.prior = rng.uniform(0.1, 0.9);
  return inst;
}

// Distance of every relu input and of the clipping term from its kink.
inline double kink_margin(const Instance& inst) {
  const auto cache = inst.model.forward(inst.batch.input);
  double margin = 1e300;
  auto scan = [&](const casediag::Matrix& m) { margin = std::min(margin, m.cwiseAbs().minCoeff()); };
  for (const auto& pre : cache.preact) scan(pre);
  scan(cache.attention.pre);
  for (std::size_t k = 0; k + 1 < cache.head_pre.size(); ++k) scan(cache.head_pre[k]);
  margin = std::min(margin, std::abs(casediag::nnpu_risk(inst.batch, inst.model, inst.prior).inner));
  return margin;
}

struct GroupError {
  std::string group;
  double relative_error = 0.0;
};

inline std::vector<GroupError> compare(Instance& inst, double eps = 1e-6) {
  using namespace casediag;
  const PuParams analytic = nnpu_risk_gradient(inst.batch, inst.model, inst.prior);

  std::vector<GroupError> out;
  std::vector<std::string> names;
  auto& p = inst.model.params();
  for (std::size_t l = 0; l < p.conv_w.size(); ++l) names.push_back("conv_w" + std::to_string(l));
  for (std::size_t l = 0; l < p.conv_b.size(); ++l) names.push_back("conv_b" + std::to_string(l));
  names.push_back("att_w");
  names.push_back("att_b");
  for (std::size_t k = 0; k < p.mlp_w.size(); ++k) names.push_back("head_w" + std::to_string(k));
  for (std::size_t k = 0; k < p.mlp_b.size(); ++k) names.push_back("head_b" + std::to_string(k));
  names.push_back("known_row");
  for (const auto& [node, _] : p.node_rows) names.push_back("node:" + node.label);

  std::vector<std::vector<double>> numeric;
  for_each_block(p, [&](double* data, Eigen::Index n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = nnpu_risk(inst.batch, inst.model, inst.prior).risk;
      data[i] = saved - eps;
      const double down = nnpu_risk(inst.batch, inst.model, inst.prior).risk;
      data[i] = saved;
      g[static_cast<std::size_t>(i)] = (up - down) / (2.0 * eps);
    }
    numeric.push_back(std::move(g));
  });

  std::vector<std::vector<double>> exact;
  PuParams a = analytic;
  // Node rows absent from the analytic gradient are zero.
  for (const auto& [node, row] : p.node_rows) {
    if (!a.node_rows.contains(node)) a.node_rows[node] = Vector::Zero(row.size());
  }
  for_each_block(a, [&](double* data, Eigen::Index n) { exact.emplace_back(data, data + n); });

  for (std::size_t k = 0; k < numeric.size(); ++k) {
    double diff = 0.0;
    double na = 0.0;
    double nn = 0.0;
    for (std::size_t i = 0; i < numeric[k].size(); ++i) {
      diff += (numeric[k][i] - exact[k][i]) * (numeric[k][i] - exact[k][i]);
      na += exact[k][i] * exact[k][i];
      nn += numeric[k][i] * numeric[k][i];
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    // Both sides vanish (e.g. a dead relu group): agreement is exact up to FD noise.
    const double rel = scale < 1e-9 ? std::sqrt(diff) : std::sqrt(diff) / scale;
    out.push_back({names[k], rel});
  }
  return out;
}

}  // namespace gradcheck
