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

#include "casediag/pu_train.hpp"

#include <algorithm>
#include <cmath>

#include "casediag/error.hpp"
#include "casediag/rng.hpp"

namespace casediag {

void TrainingConfig::validate() const {
  if (epochs < 0) throw Error(Errc::InvalidArgument, "epochs must be non-negative");
  if (!(step_size > 0.0)) throw Error(Errc::InvalidArgument, "step size must be positive");
  if (!(discount > 0.0 && discount <= 1.0)) throw Error(Errc::InvalidArgument, "discount must lie in (0, 1]");
  if (batch_size < 2) throw Error(Errc::InvalidArgument, "batch size must be at least 2");
  if (global_prior && !(*global_prior > 0.0 && *global_prior < 1.0)) {
    throw Error(Errc::InvalidArgument, "class prior must lie in (0, 1)");
  }
}

void AdamOptimizer::step(PuParams& params, const PuParams& grad, double step_size) {
  if (!ready_) {
    m_ = params.zeros_like();
    v_ = params.zeros_like();
    ready_ = true;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](double* p, const double* g, double* m, double* v, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= step_size * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon_);
    }
  };

  // Dense blocks: walk the four structures in lockstep.
  auto dense = [](auto& p) {
    using Ptr = decltype(p.att_w.data());
    std::vector<std::pair<Ptr, Eigen::Index>> out;
    for (auto& w : p.conv_w) out.emplace_back(w.data(), w.size());
    for (auto& b : p.conv_b) out.emplace_back(b.data(), b.size());
    out.emplace_back(p.att_w.data(), p.att_w.size());
    out.emplace_back(&p.att_b, 1);
    for (auto& w : p.mlp_w) out.emplace_back(w.data(), w.size());
    for (auto& b : p.mlp_b) out.emplace_back(b.data(), b.size());
    out.emplace_back(p.known_row.data(), p.known_row.size());
    return out;
  };
  const auto pb = dense(params);
  const auto gb = dense(grad);
  const auto mb = dense(m_);
  const auto vb = dense(v_);
  for (std::size_t k = 0; k < pb.size(); ++k) {
    update(pb[k].first, gb[k].first, mb[k].first, vb[k].first, pb[k].second);
  }

  for (const auto& [node, row] : grad.node_rows) {
    auto it = params.node_rows.find(node);
    if (it == params.node_rows.end()) continue;
    auto& m = m_.node_rows.try_emplace(node, Vector::Zero(row.size())).first->second;
    auto& v = v_.node_rows.try_emplace(node, Vector::Zero(row.size())).first->second;
    update(it->second.data(), row.data(), m.data(), v.data(), row.size());
  }
}

PuStepSignal pu_step_signal(const PuBatch& batch, const Vector& logits, double prior, PuObjective objective) {
  PuStepSignal s;
  std::vector<double> pos;
  std::vector<double> unl;
  for (int j : batch.positive) pos.push_back(logits[j]);
  for (int j : batch.unlabeled) unl.push_back(logits[j]);
  s.risk = nnpu_risk(pos, unl, prior);
  s.dlogits = Vector::Zero(logits.size());
  const double np = static_cast<double>(pos.size());
  const double nu = static_cast<double>(unl.size());
  auto slope = [](double z) { return sigmoid(z) * sigmoid(-z); };

  switch (objective) {
    case PuObjective::PositiveNegative: {
      const double n = np + nu;
      double value = 0.0;
      for (int j : batch.positive) {
        value += sigmoid(-logits[j]);
        s.dlogits[j] = -slope(logits[j]) / n;
      }
      for (int j : batch.unlabeled) {
        value += sigmoid(logits[j]);
        s.dlogits[j] = slope(logits[j]) / n;
      }
      s.value = value / n;
      return s;
    }
    case PuObjective::Unbiased:
    case PuObjective::NonNegative: {
      const bool correct = objective == PuObjective::NonNegative && s.risk.used_correction;
      if (!correct) {
        s.value = prior * s.risk.positive_risk + s.risk.inner;
        if (objective == PuObjective::NonNegative) s.value = s.risk.risk;
        for (int j : batch.positive) s.dlogits[j] = -2.0 * prior * slope(logits[j]) / np;
        for (int j : batch.unlabeled) s.dlogits[j] = slope(logits[j]) / nu;
      } else {
        // Descend on prior * R_p^- - R_u^- (pushes the negative-class risk back up).
        s.value = s.risk.risk;
        s.discounted = true;
        for (int j : batch.positive) s.dlogits[j] = prior * slope(logits[j]) / np;
        for (int j : batch.unlabeled) s.dlogits[j] = -slope(logits[j]) / nu;
      }
      return s;
    }
  }
  return s;
}

namespace {

bool all_finite(PuParams& p) {
  bool ok = true;
  for_each_block(p, [&](const double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n && ok; ++i) ok = std::isfinite(data[i]);
  });
  return ok;
}

PuBatch cap_batch(const PuBatch& b, int cap, Rng& rng) {
  const std::size_t m = b.input.scored.size();
  if (static_cast<int>(m) <= cap) return b;
  std::vector<int> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < static_cast<std::size_t>(cap); ++i) std::swap(order[i], order[i + rng.index(m - i)]);
  order.resize(static_cast<std::size_t>(cap));
  std::sort(order.begin(), order.end());
  PuBatch out;
  out.case_id = b.case_id;
  out.prior = b.prior;
  out.input.text = b.input.text;
  out.input.nodes = b.input.nodes;
  out.input.adjacency = b.input.adjacency;
  std::vector<bool> positive(m, false);
  for (int j : b.positive) positive[static_cast<std::size_t>(j)] = true;
  for (int j : order) {
    const int pos = static_cast<int>(out.input.scored.size());
    out.input.scored.push_back(b.input.scored[static_cast<std::size_t>(j)]);
    (positive[static_cast<std::size_t>(j)] ? out.positive : out.unlabeled).push_back(pos);
  }
  return out;
}

}  // namespace

PuTrainingResult train_domain_pu(std::span<const PuBatch> batches, const TrainingConfig& cfg) {
  return train_domain_pu(batches, cfg, PuModel::initialize(cfg.arch, cfg.seed));
}

double empirical_prior(const PuBatch& batch) {
  const double n = static_cast<double>(batch.input.scored.size());
  if (n == 0.0) return 0.5;
  if (batch.truth.size() == batch.input.scored.size()) {
    double pos = 0.0;
    for (auto t : batch.truth) pos += t ? 1.0 : 0.0;
    return pos / n;
  }
  return static_cast<double>(batch.positive.size()) / n;
}

PuTrainingResult train_domain_pu(std::span<const PuBatch> batches, const TrainingConfig& cfg, PuModel initial) {
  cfg.validate();
  for (const auto& b : batches) {
    if (b.positive.empty() || b.unlabeled.empty()) {
      throw Error(Errc::InvalidArgument, "case '" + b.case_id + "' needs positive and unlabeled nodes");
    }
  }
  PuTrainingResult result;
  result.model = std::move(initial);
  for (const auto& b : batches) result.model.register_nodes(b.input.nodes);

  AdamOptimizer adam(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  Rng rng(mix_seed(cfg.seed, 0x747261696eULL));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& original : batches) {
      const PuBatch batch = cap_batch(original, cfg.batch_size, rng);
      const double prior = cfg.global_prior.value_or(batch.prior);
      if (!(prior > 0.0 && prior < 1.0)) {
        throw Error(Errc::InvalidArgument, "class prior for case '" + batch.case_id + "' must lie in (0, 1)");
      }
      const auto& model = result.model;
      const ForwardCache cache = model.forward(batch.input);
      const PuStepSignal signal = pu_step_signal(batch, cache.logits, prior, cfg.objective);
      if (!std::isfinite(signal.value)) {
        throw Error(Errc::NonFiniteLoss, "non-finite risk at epoch " + std::to_string(epoch) + ", case '" +
                                             batch.case_id + "'");
      }
      const PuParams grad = model.backward(batch.input, cache, signal.dlogits);
      const double lr = signal.discounted ? cfg.discount * cfg.step_size : cfg.step_size;
      adam.step(result.model.params(), grad, lr);
      if (!all_finite(result.model.params())) {
        throw Error(Errc::NonFiniteLoss, "parameters became non-finite at epoch " + std::to_string(epoch) +
                                             ", case '" + batch.case_id + "'");
      }
      result.steps.push_back({epoch, batch.case_id, signal.value, signal.risk.inner,
                              signal.risk.used_correction, lr});
      total += signal.value;
    }
    result.epoch_risk.push_back(batches.empty() ? 0.0 : total / static_cast<double>(batches.size()));
  }
  return result;
}

PuParams nnpu_risk_gradient(const PuBatch& batch, const PuModel& model, double prior) {
  const ForwardCache cache = model.forward(batch.input);
  PuRisk risk;
  {
    std::vector<double> pos;
    std::vector<double> unl;
    for (int j : batch.positive) pos.push_back(cache.logits[j]);
    for (int j : batch.unlabeled) unl.push_back(cache.logits[j]);
    risk = nnpu_risk(pos, unl, prior);
  }
  const double np = static_cast<double>(batch.positive.size());
  const double nu = static_cast<double>(batch.unlabeled.size());
  auto slope = [](double z) { return sigmoid(z) * sigmoid(-z); };
  Vector dlogits = Vector::Zero(cache.logits.size());
  const bool active = !risk.used_correction;
  for (int j : batch.positive) {
    const double s = slope(cache.logits[j]);
    dlogits[j] = -prior * s / np - (active ? prior * s / np : 0.0);
  }
  if (active) {
    for (int j : batch.unlabeled) dlogits[j] = slope(cache.logits[j]) / nu;
  }
  return model.backward(batch.input, cache, dlogits);
}

}  // namespace casediag
