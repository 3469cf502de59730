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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "casediag/pu_model.hpp"

namespace casediag {

enum class PuObjective {
  NonNegative,       // clipped risk with the correction branch
  Unbiased,          // plain ERM on the unclipped risk
  PositiveNegative,  // unlabeled treated as negative
};

struct TrainingConfig {
  PuArchitecture arch;
  int epochs = 100;
  double step_size = 1e-4;
  double discount = 0.1;   // correction-branch step is discount * step_size
  int batch_size = 2000;   // max scored node instances per optimizer step
  std::optional<double> global_prior;  // overrides per-case priors when set
  std::uint64_t seed = 0;
  PuObjective objective = PuObjective::NonNegative;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

/// Adam with lazily allocated moments for node rows.
class AdamOptimizer {
 public:
  AdamOptimizer(double beta1, double beta2, double epsilon)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void step(PuParams& params, const PuParams& grad, double step_size);
  long steps() const { return t_; }

 private:
  double beta1_;
  double beta2_;
  double epsilon_;
  long t_ = 0;
  bool ready_ = false;
  PuParams m_;
  PuParams v_;
};

struct PuStepLog {
  int epoch = 0;
  std::string case_id;
  double risk = 0.0;
  double inner = 0.0;
  bool used_correction = false;
  double step_size = 0.0;
};

struct PuTrainingResult {
  PuModel model;
  std::vector<double> epoch_risk;  // mean logged risk per epoch
  std::vector<PuStepLog> steps;
};

/// Objective value and the per-logit gradient that drives one update.
struct PuStepSignal {
  PuRisk risk;
  double value = 0.0;
  Vector dlogits;
  bool discounted = false;
};

PuStepSignal pu_step_signal(const PuBatch& batch, const Vector& logits, double prior, PuObjective objective);

/// Trains one shared scorer over all cases, one optimizer step per case per epoch.
PuTrainingResult train_domain_pu(std::span<const PuBatch> batches, const TrainingConfig& cfg);
/// Same, starting from `initial` instead of a fresh initialization.
PuTrainingResult train_domain_pu(std::span<const PuBatch> batches, const TrainingConfig& cfg, PuModel initial);

/// Class prior from ground truth when the batch carries it (true positives over
/// scored nodes), otherwise the labeled fraction.
double empirical_prior(const PuBatch& batch);

/// Gradient of nnpu_risk (the clipped value) with respect to every parameter.
PuParams nnpu_risk_gradient(const PuBatch& batch, const PuModel& model, double prior);

}  // namespace casediag
