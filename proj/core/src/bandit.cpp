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

#include "casediag/bandit.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "casediag/error.hpp"
#include "casediag/rng.hpp"

namespace casediag {

namespace {

struct NetView {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w1;
  Eigen::Map<const Vector> b1;
  Eigen::Map<const Vector> w2;
  double b2;

  NetView(const Vector& p, int m, int in)
      : w1(p.data(), m, in), b1(p.data() + m * in, m), w2(p.data() + m * in + m, m), b2(p[m * in + 2 * m]) {}
};

Eigen::Index flat_size(int m, int in) { return static_cast<Eigen::Index>(m) * in + 2 * m + 1; }

nlohmann::json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void BanditConfig::validate() const {
  if (hidden < 1) throw Error(Errc::InvalidArgument, "bandit hidden width must be positive");
  if (exploration < 0.0) throw Error(Errc::InvalidArgument, "exploration coefficient must be non-negative");
  if (!(regularizer > 0.0)) throw Error(Errc::InvalidArgument, "regularizer must be positive");
  if (horizon < 1) throw Error(Errc::InvalidArgument, "horizon must be positive");
  if (update_steps < 0 || !(update_step_size > 0.0)) throw Error(Errc::InvalidArgument, "invalid update schedule");
  if (lambda < 0.0) throw Error(Errc::InvalidArgument, "lambda must be non-negative");
}

Reward fuse_reward(double r_pu, double r_lmrc, double lambda) {
  if (!(r_pu > 0.0 && r_pu < 1.0)) throw Error(Errc::OutOfRange, "PU reward must lie in (0, 1)");
  if (!(r_lmrc >= 0.0 && r_lmrc <= 1.0)) throw Error(Errc::OutOfRange, "reading-comprehension reward must lie in [0, 1]");
  if (!(lambda >= 0.0)) throw Error(Errc::OutOfRange, "lambda must be non-negative");
  return Reward{r_pu, r_lmrc, lambda, r_pu + lambda * r_lmrc};
}

BanditState BanditState::fresh(std::string case_id, Vector case_text, int input_dim, const BanditConfig& cfg) {
  cfg.validate();
  if (input_dim < 1) throw Error(Errc::InvalidArgument, "context dimension must be positive");
  BanditState s;
  s.case_id = std::move(case_id);
  s.case_text = std::move(case_text);
  s.input_dim = input_dim;
  s.hidden = cfg.hidden;
  s.exploration = cfg.exploration;
  s.regularizer = cfg.regularizer;
  s.update_steps = cfg.update_steps;
  s.update_step_size = cfg.update_step_size;
  s.horizon = cfg.horizon;
  const int m = cfg.hidden;
  s.params = Vector::Zero(flat_size(m, input_dim));
  Rng rng(mix_seed(cfg.seed, fnv1a64(s.case_id)));
  const double w1_scale = std::sqrt(2.0 / input_dim);
  const double w2_scale = std::sqrt(1.0 / m);
  // Mirrored pairs: unit i + m/2 copies unit i's input weights with the
  // opposite output weight, so f is identically zero at initialization.
  const int half = m / 2;
  const Eigen::Index w2_offset = static_cast<Eigen::Index>(m) * input_dim + m;
  for (int i = 0; i < half; ++i) {
    for (int k = 0; k < input_dim; ++k) {
      const double w = w1_scale * rng.normal();
      s.params[static_cast<Eigen::Index>(i) * input_dim + k] = w;
      s.params[static_cast<Eigen::Index>(i + half) * input_dim + k] = w;
    }
    const double v = w2_scale * rng.normal();
    s.params[w2_offset + i] = v;
    s.params[w2_offset + i + half] = -v;
  }
  s.confidence = Vector::Constant(s.params.size(), cfg.regularizer);
  return s;
}

double BanditState::value(const Vector& x) const {
  if (x.size() != input_dim) throw Error(Errc::DimensionMismatch, "context has the wrong dimension");
  const NetView net(params, hidden, input_dim);
  const Vector h = (net.w1 * x + net.b1).cwiseMax(0.0);
  return net.w2.dot(h) + net.b2;
}

Vector BanditState::gradient(const Vector& x) const {
  if (x.size() != input_dim) throw Error(Errc::DimensionMismatch, "context has the wrong dimension");
  const NetView net(params, hidden, input_dim);
  const Vector pre = net.w1 * x + net.b1;
  Vector g(params.size());
  const Eigen::Index m = hidden;
  const Eigen::Index p = input_dim;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double gate = pre[i] > 0.0 ? net.w2[i] : 0.0;
    g.segment(i * p, p) = gate * x;
    g[m * p + i] = gate;
    g[m * p + m + i] = pre[i] > 0.0 ? pre[i] : 0.0;
  }
  g[m * p + 2 * m] = 1.0;
  return g;
}

double BanditState::loss() const {
  double total = 0.0;
  for (std::size_t z = 0; z < history_rewards.size(); ++z) {
    const double err = value(history_contexts[z]) - history_rewards[z];
    total += err * err;
  }
  return history_rewards.empty() ? 0.0 : total / static_cast<double>(history_rewards.size());
}

UcbSelection ucb_select(const BanditState& state, std::span<const ArmContext> contexts) {
  if (contexts.empty()) throw Error(Errc::EmptyArmSet, "no arms to select from");
  UcbSelection sel;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < contexts.size(); ++j) {
    const double mean = state.value(contexts[j].x);
    const Vector g = state.gradient(contexts[j].x);
    const double bonus =
        state.exploration * std::sqrt((g.array().square() / state.confidence.array()).sum() / state.hidden);
    const double u = mean + bonus;
    sel.mean.push_back(mean);
    sel.ucb.push_back(u);
    if (u > best) {
      best = u;
      sel.chosen = static_cast<int>(j);
    }
  }
  return sel;
}

BanditState ucb_update(const BanditState& state, const ArmContext& context, const Reward& reward) {
  if (state.round >= state.horizon) {
    throw Error(Errc::HorizonExhausted, "case '" + state.case_id + "' already played " +
                                            std::to_string(state.horizon) + " rounds");
  }
  BanditState next = state;
  const Vector played_gradient = state.gradient(context.x);
  next.history_contexts.push_back(context.x);
  next.history_rewards.push_back(reward.total);
  const double n = static_cast<double>(next.history_rewards.size());
  for (int step = 0; step < next.update_steps; ++step) {
    Vector grad = Vector::Zero(next.params.size());
    for (std::size_t z = 0; z < next.history_rewards.size(); ++z) {
      const double err = next.value(next.history_contexts[z]) - next.history_rewards[z];
      grad += (2.0 * err / n) * next.gradient(next.history_contexts[z]);
    }
    next.params -= next.update_step_size * grad;
  }
  if (!next.params.allFinite()) {
    throw Error(Errc::NonFiniteLoss, "bandit '" + next.case_id + "' diverged at round " + std::to_string(next.round));
  }
  next.confidence.array() += played_gradient.array().square() / next.hidden;
  ++next.round;
  return next;
}

nlohmann::json BanditState::to_json() const {
  nlohmann::json j;
  j["case_id"] = case_id;
  j["case_text"] = vec_json(case_text);
  j["input_dim"] = input_dim;
  j["hidden"] = hidden;
  j["exploration"] = exploration;
  j["regularizer"] = regularizer;
  j["update_steps"] = update_steps;
  j["update_step_size"] = update_step_size;
  j["round"] = round;
  j["horizon"] = horizon;
  j["params"] = vec_json(params);
  j["confidence"] = vec_json(confidence);
  auto contexts = nlohmann::json::array();
  for (const auto& x : history_contexts) contexts.push_back(vec_json(x));
  j["history_contexts"] = std::move(contexts);
  j["history_rewards"] = history_rewards;
  return j;
}

BanditState BanditState::from_json(const nlohmann::json& j) {
  BanditState s;
  s.case_id = j.at("case_id").get<std::string>();
  s.case_text = vec_from(j.at("case_text"));
  s.input_dim = j.at("input_dim").get<int>();
  s.hidden = j.at("hidden").get<int>();
  s.exploration = j.at("exploration").get<double>();
  s.regularizer = j.at("regularizer").get<double>();
  s.update_steps = j.at("update_steps").get<int>();
  s.update_step_size = j.at("update_step_size").get<double>();
  s.round = j.at("round").get<int>();
  s.horizon = j.at("horizon").get<int>();
  s.params = vec_from(j.at("params"));
  s.confidence = vec_from(j.at("confidence"));
  if (s.params.size() != flat_size(s.hidden, s.input_dim) || s.confidence.size() != s.params.size()) {
    throw Error(Errc::DimensionMismatch, "bandit checkpoint for '" + s.case_id + "' has inconsistent sizes");
  }
  for (const auto& x : j.at("history_contexts")) s.history_contexts.push_back(vec_from(x));
  s.history_rewards = j.at("history_rewards").get<std::vector<double>>();
  return s;
}

const BanditState* BanditArchive::find(const std::string& case_id) const {
  for (const auto& s : states) {
    if (s.case_id == case_id) return &s;
  }
  return nullptr;
}

const BanditState* BanditArchive::nearest(const Vector& text) const {
  const BanditState* best = nullptr;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (const auto& s : states) {
    const double sim = cosine_similarity(s.case_text, text);
    if (sim > best_sim) {
      best_sim = sim;
      best = &s;
    }
  }
  return best;
}

nlohmann::json BanditArchive::to_json() const {
  nlohmann::json j;
  j["format"] = "casediag.bandits";
  j["version"] = 1;
  auto cases = nlohmann::json::array();
  for (const auto& s : states) cases.push_back(s.to_json());
  j["cases"] = std::move(cases);
  return j;
}

BanditArchive BanditArchive::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "casediag.bandits" || j.value("version", 0) != 1) {
    throw Error(Errc::InvalidArgument, "unsupported bandit archive format/version");
  }
  BanditArchive a;
  for (const auto& c : j.at("cases")) a.states.push_back(BanditState::from_json(c));
  return a;
}

}  // namespace casediag
