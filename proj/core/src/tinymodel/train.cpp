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

#include "specdec_lab/tinymodel/train.hpp"

#include <cmath>
#include <numbers>

#include "specdec_lab/errors.hpp"

namespace specdec_lab::tinymodel {

void TrainConfig::validate() const {
  if (k == 0) throw InvalidArgument("train.k must be positive");
  if (!(omega >= 0.0 && omega <= 1.0)) throw InvalidArgument("train.omega must lie in [0, 1]");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("train.lr must be positive");
  if (!(min_lr_ratio >= 0.0 && min_lr_ratio <= 1.0)) {
    throw InvalidArgument("train.min_lr_ratio must lie in [0, 1]");
  }
  if (batch == 0 || seq_len == 0) throw InvalidArgument("train.batch and seq_len must be positive");
  if (grad_clip < 0.0) throw InvalidArgument("train.grad_clip must be nonnegative");
  if (eval_batches == 0) throw InvalidArgument("train.eval_batches must be positive");
}

double scheduled_lr(const TrainConfig& cfg, std::size_t step) {
  if (step < cfg.warmup_steps) {
    return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
  }
  const std::size_t span = cfg.steps > cfg.warmup_steps ? cfg.steps - cfg.warmup_steps : 1;
  const double progress =
      std::min(1.0, static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(span));
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return cfg.lr * (cfg.min_lr_ratio + (1.0 - cfg.min_lr_ratio) * cosine);
}

Adam::Adam(std::vector<Tensor<float>> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.adam_eps),
      clip_(cfg.grad_clip) {
  for (const auto& p : params_) {
    m_.push_back(Matrix<float>::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix<float>::Zero(p.rows(), p.cols()));
  }
}

double Adam::step(double lr) {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (p.has_grad()) sq += p.grad().template cast<double>().squaredNorm();
  }
  const double norm = std::sqrt(sq);
  const double scale = (clip_ > 0.0 && norm > clip_) ? clip_ / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<float>& p = params_[i];
    if (!p.has_grad()) continue;
    const Matrix<float> g = p.grad() * static_cast<float>(scale);
    m_[i] = static_cast<float>(beta1_) * m_[i] + static_cast<float>(1.0 - beta1_) * g;
    v_[i] = static_cast<float>(beta2_) * v_[i] +
            static_cast<float>(1.0 - beta2_) * g.cwiseProduct(g);
    const auto step_size = static_cast<float>(lr / c1);
    const auto denom_scale = static_cast<float>(1.0 / std::sqrt(c2));
    p.mutable_value().array() -=
        step_size * m_[i].array() /
        ((v_[i].array().sqrt() * denom_scale) + static_cast<float>(eps_));
    p.zero_grad();
  }
  return norm;
}

namespace {

constexpr std::uint64_t kEvalStream = 0xe7a1;

struct Example {
  SequenceBatch inputs;
  std::vector<std::int32_t> labels;
};

Example draw(const Corpus& corpus, Split split, const TrainConfig& cfg, Rng& rng) {
  const SequenceBatch full = corpus.sample(split, cfg.batch, cfg.seq_len + 1, rng);
  Example ex;
  ex.inputs.batch = cfg.batch;
  ex.inputs.length = cfg.seq_len;
  for (std::size_t b = 0; b < cfg.batch; ++b) {
    const auto* row = full.tokens.data() + b * full.length;
    ex.inputs.tokens.insert(ex.inputs.tokens.end(), row, row + cfg.seq_len);
    ex.labels.insert(ex.labels.end(), row + 1, row + 1 + cfg.seq_len);
  }
  return ex;
}

std::vector<Example> eval_set(const Corpus& corpus, const TrainConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, kEvalStream));
  std::vector<Example> out;
  for (std::size_t i = 0; i < cfg.eval_batches; ++i) {
    out.push_back(draw(corpus, Split::Eval, cfg, rng));
  }
  return out;
}

struct TargetView {
  std::vector<Tensor<float>> trace;
  Matrix<float> probs;
};

TargetView run_target(const TransformerParams<float>& target, const SequenceBatch& batch,
                      bool need_trace) {
  Graph<float> g(false);
  auto fr = forward_target(g, target, batch);
  TargetView out;
  out.probs = row_softmax(fr.logits.value());
  if (need_trace) out.trace = std::move(fr.trace);
  return out;
}

/// Shared loop: `loss_of(graph, example)` builds the scalar loss.
template <typename LossFn>
TrainReport run_training(std::vector<Tensor<float>> params, const Corpus& corpus,
                         const TrainConfig& cfg, const StepCallback& on_step, LossFn loss_of) {
  cfg.validate();
  const auto evals = eval_set(corpus, cfg);
  auto eval_loss = [&] {
    double total = 0.0;
    for (const auto& ex : evals) {
      Graph<float> g(false);
      total += static_cast<double>(loss_of(g, ex).scalar());
    }
    return total / static_cast<double>(evals.size());
  };

  TrainReport report;
  report.initial_eval_loss = eval_loss();
  Adam adam(params, cfg);
  Rng rng(derive_seed(cfg.seed, 0));
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Example ex = draw(corpus, Split::Train, cfg, rng);
    Graph<float> g(true);
    const Tensor<float> loss = loss_of(g, ex);
    const double value = static_cast<double>(loss.scalar());
    if (!std::isfinite(value)) {
      throw TrainingFailure(static_cast<std::int64_t>(step), "non-finite loss");
    }
    g.backward(loss);
    const double norm = adam.step(scheduled_lr(cfg, step));
    if (!std::isfinite(norm)) {
      throw TrainingFailure(static_cast<std::int64_t>(step), "non-finite gradient");
    }
    report.train_losses.push_back(value);
    if (on_step) on_step(step, value);
  }
  report.final_eval_loss = eval_loss();
  if (!std::isfinite(report.final_eval_loss)) {
    throw TrainingFailure(static_cast<std::int64_t>(cfg.steps), "non-finite eval loss");
  }
  return report;
}

}  // namespace

TrainReport train_transformer(TransformerParams<float>& params, const Corpus& corpus,
                              const TrainConfig& cfg, const StepCallback& on_step) {
  return run_training(params.parameters(), corpus, cfg, on_step,
                      [&](Graph<float>& g, const Example& ex) {
                        auto fr = forward_target(g, params, ex.inputs);
                        return hard_target_loss(g, fr.logits, ex.labels);
                      });
}

TrainReport train_draft(TransformerParams<float>& draft, const TransformerParams<float>& target,
                        const Corpus& corpus, const TrainConfig& cfg, LossKind loss,
                        const StepCallback& on_step) {
  if (draft.spec.vocab != target.spec.vocab) {
    throw InvalidArgument("train_draft: draft and target vocabularies differ");
  }
  return run_training(draft.parameters(), corpus, cfg, on_step,
                      [&](Graph<float>& g, const Example& ex) {
                        auto fr = forward_target(g, draft, ex.inputs);
                        if (loss == LossKind::Hard) {
                          return hard_target_loss(g, fr.logits, ex.labels);
                        }
                        const TargetView tv = run_target(target, ex.inputs, false);
                        return mixed_loss(g, fr.logits, tv.probs, cfg.omega);
                      });
}

TrainReport train_spire(SpireParams<float>& draft, const TransformerParams<float>& target,
                        const Corpus& corpus, const TrainConfig& cfg, LossKind loss,
                        const StepCallback& on_step) {
  if (draft.substitution_offset + draft.body.blocks.size() > target.blocks.size() + 1) {
    throw InvalidArgument("train_spire: substitution offset exceeds the target depth");
  }
  if (cfg.seq_len % cfg.k != 0) {
    throw InvalidArgument("train_spire: seq_len must be divisible by k");
  }
  return run_training(draft.parameters(), corpus, cfg, on_step,
                      [&](Graph<float>& g, const Example& ex) {
                        const TargetView tv = run_target(target, ex.inputs, true);
                        const Tensor<float> logits =
                            spire_train_forward<float>(g, draft, ex.inputs, tv.trace, cfg.k);
                        if (loss == LossKind::Hard) {
                          return hard_target_loss(g, logits, ex.labels);
                        }
                        return mixed_loss(g, logits, tv.probs, cfg.omega);
                      });
}

}  // namespace specdec_lab::tinymodel
