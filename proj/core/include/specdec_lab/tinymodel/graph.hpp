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

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace specdec_lab::tinymodel {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::function<void(const Matrix<T>&)> backward;

  void accumulate(const Matrix<T>& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
  Matrix<T>& grad_buffer() {
    if (grad.size() == 0) {
      grad = Matrix<T>::Zero(value.rows(), value.cols());
    }
    return grad;
  }
};

/// Shared handle to a 2-D value with an optional adjoint.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix<T> value);
  static Tensor parameter(Matrix<T> value);

  bool defined() const { return node_ != nullptr; }
  const Matrix<T>& value() const { return node_->value; }
  Matrix<T>& mutable_value() { return node_->value; }
  const Matrix<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  void zero_grad() { node_->grad.resize(0, 0); }
  T scalar() const { return node_->value(0, 0); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}
  template <typename>
  friend class Graph;

  std::shared_ptr<Node<T>> node_;
};

/// Per-query key lists in CSR form: keys[offsets[i] .. offsets[i+1]) are the
/// key rows attended by query row i.
struct AttendList {
  std::vector<std::int32_t> offsets{0};
  std::vector<std::int32_t> keys;

  std::size_t queries() const { return offsets.size() - 1; }
  void push(std::int32_t key) { keys.push_back(key); }
  void close_query() { offsets.push_back(static_cast<std::int32_t>(keys.size())); }
};

struct HeadLayout {
  std::size_t n_heads = 1;
  std::size_t n_kv_heads = 1;
  std::size_t d_head = 1;
};

/// Records differentiable operations and replays their adjoints in reverse.
/// With gradients disabled nothing is recorded and ops are plain evaluation.
template <typename T>
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  Tensor<T> constant(Matrix<T> value) const { return Tensor<T>::constant(std::move(value)); }

  Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> rmsnorm(const Tensor<T>& x, const Tensor<T>& gain);
  Tensor<T> gelu(const Tensor<T>& x);
  Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::int32_t> rows);
  Tensor<T> concat_rows(std::span<const Tensor<T>> parts);
  /// Rotary embedding on interleaved pairs within each head, one position per row.
  Tensor<T> rope(const Tensor<T>& x, std::span<const std::int64_t> positions,
                 std::size_t d_head);
  /// Softmax attention over explicit key lists; k and v share row indices.
  Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                      const AttendList& lists, const HeadLayout& heads);
  /// sum_l softmax(w[row])_l * layers[l].
  Tensor<T> mix_layers(std::span<const Tensor<T>> layers, const Tensor<T>& w,
                       std::size_t row);
  /// Mean over rows of -log softmax(logits)[label].
  Tensor<T> hard_cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> labels);
  /// Mean over rows of -sum_i p_i log softmax(logits)_i with p a constant.
  Tensor<T> soft_cross_entropy(const Tensor<T>& logits, const Matrix<T>& target_probs);
  /// Mean over rows of sum_i min(p_i, softmax(logits)_i).
  Tensor<T> expected_acceptance(const Tensor<T>& logits, const Matrix<T>& target_probs);
  /// ca * a + cb * b for same-shape inputs.
  Tensor<T> linear_combination(const Tensor<T>& a, T ca, const Tensor<T>& b, T cb);

  /// Seeds d(out)/d(out) = 1 and propagates to every recorded input.
  void backward(const Tensor<T>& scalar_out);

  std::size_t recorded_ops() const { return tape_.size(); }

 private:
  Tensor<T> record(Matrix<T> value, bool needs_grad,
                   std::function<void(const Matrix<T>&)> backward);
  bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) const;

  bool grad_enabled_;
  std::vector<std::shared_ptr<Node<T>>> tape_;
};

template <typename T>
Matrix<T> row_softmax(const Matrix<T>& logits);

}  // namespace specdec_lab::tinymodel
