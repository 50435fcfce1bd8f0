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
#include <span>
#include <vector>

#include "specdec_lab/tinymodel/transformer.hpp"

namespace specdec_lab::tinymodel {

/// Feedback-memory draft. Draft layer i (0-based) attends to past memory
/// vectors instead of same-layer activations:
///   m_t^i = sum_l softmax(mix[i])_l x_t^l,  l = 0..n_layer (0 = embedding).
/// Positions before the block being drafted take the target activation
/// y^(i + substitution_offset) instead (the input of target block
/// i + substitution_offset, from which draft block i was pruned).
template <typename T>
struct SpireParams {
  TransformerParams<T> body;
  Tensor<T> mix;  // n_layer x (n_layer + 1)
  std::size_t substitution_offset = 0;

  /// Pruned from the top of the target; mix rows start selecting each
  /// block's own input (x^i) so the draft begins as the pruned target.
  static SpireParams from_target(const TransformerParams<T>& target, std::size_t layers_kept,
                                 const arch::AttentionPolicy& policy);

  std::vector<Tensor<T>> parameters() const;
  std::vector<std::string> parameter_names() const;
  SpireParams clone() const;
  template <typename U>
  SpireParams<U> cast() const;
};

/// Logit placed on the selected layer by from_target.
inline constexpr double kInitialMixLogit = 4.0;

/// softmax(w[layer])-weighted combination of trace[0..n_layer].
template <typename T>
Tensor<T> memory_vectors(Graph<T>& g, std::span<const Tensor<T>> trace, const Tensor<T>& mix,
                         std::size_t layer);

/// Pass-parallel training forward over blocks of `depth` positions. Pass j
/// evaluates positions {m * depth + j}; in-block history comes from earlier
/// passes' draft memories, out-of-block history from `target_trace`
/// (rows aligned with `batch`). Returns logits in natural row order.
template <typename T>
Tensor<T> spire_train_forward(Graph<T>& g, const SpireParams<T>& params,
                              const SequenceBatch& batch,
                              std::span<const Tensor<T>> target_trace, std::size_t depth);

}  // namespace specdec_lab::tinymodel
