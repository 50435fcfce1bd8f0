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

#include "specdec_lab/tinymodel/loss.hpp"

#include "specdec_lab/errors.hpp"

namespace specdec_lab::tinymodel {

template <typename T>
Tensor<T> hard_target_loss(Graph<T>& g, const Tensor<T>& logits,
                           std::span<const std::int32_t> labels) {
  return g.hard_cross_entropy(logits, labels);
}

template <typename T>
Tensor<T> mixed_loss(Graph<T>& g, const Tensor<T>& logits, const Matrix<T>& target_probs,
                     double omega) {
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw InvalidArgument("mixed_loss: omega must lie in [0, 1]");
  }
  const Tensor<T> distill = g.soft_cross_entropy(logits, target_probs);
  const Tensor<T> alpha = g.expected_acceptance(logits, target_probs);
  return g.linear_combination(distill, static_cast<T>(omega), alpha,
                              static_cast<T>(-(1.0 - omega)));
}

template Tensor<float> hard_target_loss(Graph<float>&, const Tensor<float>&,
                                        std::span<const std::int32_t>);
template Tensor<double> hard_target_loss(Graph<double>&, const Tensor<double>&,
                                         std::span<const std::int32_t>);
template Tensor<float> mixed_loss(Graph<float>&, const Tensor<float>&, const Matrix<float>&,
                                  double);
template Tensor<double> mixed_loss(Graph<double>&, const Tensor<double>&, const Matrix<double>&,
                                   double);

}  // namespace specdec_lab::tinymodel
