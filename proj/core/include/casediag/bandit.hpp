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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "casediag/embedding.hpp"
#include "casediag/graph.hpp"

namespace casediag {

struct BanditConfig {
  int hidden = 32;             // reward-network width m
  double exploration = 1.0;    // nu
  double regularizer = 1.0;    // kappa, initial confidence accumulator
  int horizon = 50;            // T rounds per case
  int update_steps = 20;
  double update_step_size = 0.1;
  double lambda = 0.5;         // weight of the reading-comprehension reward
  std::uint64_t seed = 0;

  void validate() const;
};

struct Reward {
  double r_pu = 0.0;
  double r_lmrc = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

/// total = r_pu + lambda * r_lmrc. Throws OutOfRange on r_pu outside (0,1),
/// r_lmrc outside [0,1] or negative lambda.
Reward fuse_reward(double r_pu, double r_lmrc, double lambda);

struct ArmContext {
  std::string case_id;
  int arm = 0;
  NodeId node;
  Vector x;  // [h_i, H_i^j, Z_i]
};

/// Per-case NeuralUCB state. The reward network is
/// f(x) = w2 . relu(W1 x + b1) + b2 over a flat parameter vector, mirrored at
/// initialization so that a fresh network predicts zero everywhere.
struct BanditState {
  std::string case_id;
  Vector case_text;  // text embedding of the training case, used for routing
  int input_dim = 0;
  int hidden = 0;
  double exploration = 1.0;
  double regularizer = 1.0;
  int update_steps = 20;
  double update_step_size = 0.1;
  int round = 0;    // t
  int horizon = 0;  // T
  Vector params;    // phi: W1 (row-major m x p), b1, w2, b2
  Vector confidence;  // diagonal accumulator, one entry per parameter
  std::vector<Vector> history_contexts;
  std::vector<double> history_rewards;

  static BanditState fresh(std::string case_id, Vector case_text, int input_dim, const BanditConfig& cfg);

  std::size_t parameter_count() const { return static_cast<std::size_t>(params.size()); }
  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;  // d f(x) / d phi
  double loss() const;                    // mean squared error over history

  nlohmann::json to_json() const;
  static BanditState from_json(const nlohmann::json& j);
};

struct UcbSelection {
  int chosen = 0;
  std::vector<double> ucb;
  std::vector<double> mean;  // f(x_j)
};

/// Pure: u_j = f(x_j) + nu * sqrt(sum_k g_k(x_j)^2 / (m Z_k)), m the hidden
/// width; argmax with ties going to the lowest index.
UcbSelection ucb_select(const BanditState& state, std::span<const ArmContext> contexts);

/// Appends (x, r_total), fits phi by gradient steps on the history and
/// accumulates g_k^2 / m of the played context. Throws HorizonExhausted when t == T.
BanditState ucb_update(const BanditState& state, const ArmContext& context, const Reward& reward);

/// Archive of per-case bandits. Case order is preserved.
struct BanditArchive {
  std::vector<BanditState> states;

  const BanditState* find(const std::string& case_id) const;
  /// Bandit of the training case whose text embedding is most cosine-similar
  /// (ties to the earliest case). Returns nullptr when empty.
  const BanditState* nearest(const Vector& text) const;

  nlohmann::json to_json() const;
  static BanditArchive from_json(const nlohmann::json& j);
};

}  // namespace casediag
