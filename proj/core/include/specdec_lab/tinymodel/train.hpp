/*
 * Copyright 2026 The specdec-lab Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "specdec_lab/tinymodel/corpus.hpp"
#include "specdec_lab/tinymodel/feedback.hpp"
#include "specdec_lab/tinymodel/loss.hpp"
#include "specdec_lab/tinymodel/transformer.hpp"

namespace specdec_lab::tinymodel {

enum class LossKind { Hard, Mixed };

struct TrainConfig {
  std::size_t k = 4;
  double omega = kDefaultOmega;
  double lr = 3e-3;
  double min_lr_ratio = 0.1;  // cosine floor as a fraction of lr
  std::size_t warmup_steps = 0;
  std::size_t steps = 1000;
  std::size_t batch = 4;
  std::size_t seq_len = 256;
  std::uint64_t seed = 0;
  std::size_t substitution_offset = 0;
  double grad_clip = 1.0;  // global L2 norm; 0 disables
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t eval_batches = 4;

  void validate() const;
};

struct TrainReport {
  double initial_eval_loss = 0.0;
  double final_eval_loss = 0.0;
  std::vector<double> train_losses;  // one per step
};

/// Called after every step with (step, loss).
using StepCallback = std::function<void(std::size_t, double)>;

/// Learning rate at `step` (0-based): linear warmup, then cosine decay.
double scheduled_lr(const TrainConfig& cfg, std::size_t step);

class Adam {
 public:
  Adam(std::vector<Tensor<float>> params, const TrainConfig& cfg);
  /// Applies one update from the accumulated grads, then clears them.
  /// Returns the global gradient norm before clipping.
  double step(double lr);

 private:
  std::vector<Tensor<float>> params_;
  std::vector<Matrix<float>> m_;
  std::vector<Matrix<float>> v_;
  double beta1_, beta2_, eps_, clip_;
  std::size_t t_ = 0;
};

/// Next-token cross-entropy on ground-truth text under the spec's own policy.
TrainReport train_transformer(TransformerParams<float>& params, const Corpus& corpus,
                              const TrainConfig& cfg, const StepCallback& on_step = {});

/// Dense draft trained against `target` (Mixed) or the observed tokens (Hard).
TrainReport train_draft(TransformerParams<float>& draft, const TransformerParams<float>& target,
                        const Corpus& corpus, const TrainConfig& cfg, LossKind loss,
                        const StepCallback& on_step = {});

/// Feedback-memory draft trained with k pass-parallel forwards per batch.
TrainReport train_spire(SpireParams<float>& draft, const TransformerParams<float>& target,
                        const Corpus& corpus, const TrainConfig& cfg, LossKind loss,
                        const StepCallback& on_step = {});

}  // namespace specdec_lab::tinymodel
