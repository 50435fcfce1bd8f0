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

#include <span>

#include "specdec_lab/tinymodel/graph.hpp"

namespace specdec_lab::tinymodel {

/// Cross-entropy against the observed next token, averaged over rows.
template <typename T>
Tensor<T> hard_target_loss(Graph<T>& g, const Tensor<T>& logits,
                           std::span<const std::int32_t> labels);

/// omega * CE(p_target, q) + (1 - omega) * (-alpha), alpha = mean_rows sum_i min(p_i, q_i).
template <typename T>
Tensor<T> mixed_loss(Graph<T>& g, const Tensor<T>& logits, const Matrix<T>& target_probs,
                     double omega);

inline constexpr double kDefaultOmega = 0.5;

}  // namespace specdec_lab::tinymodel
