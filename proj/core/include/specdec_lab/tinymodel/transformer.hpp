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
#include <span>
#include <string>
#include <vector>

#include "specdec_lab/arch.hpp"
#include "specdec_lab/tinymodel/graph.hpp"

namespace specdec_lab::tinymodel {

using TokenId = std::int32_t;

template <typename T>
struct BlockParams {
  Tensor<T> attn_norm;  // 1 x d
  Tensor<T> wq;         // d x d
  Tensor<T> wk;         // d x kv_dim
  Tensor<T> wv;         // d x kv_dim
  Tensor<T> wo;         // d x d
  Tensor<T> mlp_norm;   // 1 x d
  Tensor<T> w_up;       // d x d_ff
  Tensor<T> w_down;     // d_ff x d
};

/// Pre-norm decoder-only transformer with rotary attention and GELU MLPs.
template <typename T>
struct TransformerParams {
  arch::TransformerSpec spec;
  Tensor<T> embed;  // V x d
  std::vector<BlockParams<T>> blocks;
  Tensor<T> final_norm;  // 1 x d
  Tensor<T> unembed;     // d x V

  static TransformerParams random(const arch::TransformerSpec& spec, std::uint64_t seed);

  /// Parameters in declaration order: embed, per block (attn_norm, wq, wk, wv,
  /// wo, mlp_norm, w_up, w_down), final_norm, unembed.
  std::vector<Tensor<T>> parameters() const;
  std::vector<std::string> parameter_names() const;

  /// Deep copy with fresh parameter nodes.
  TransformerParams clone() const;
  template <typename U>
  TransformerParams<U> cast() const;
};

/// Top `layers_kept` blocks plus embedding/unembedding copied from the target.
template <typename T>
TransformerParams<T> prune_from(const TransformerParams<T>& target, std::size_t layers_kept);

/// Row-major [L x L] boolean mask; mask[t][s] is true iff query t sees key s.
std::vector<std::vector<bool>> streaming_mask(std::size_t length, std::size_t window,
                                              std::size_t sink);

/// Teacher-forced batch of equal-length sequences, row-major [batch x length].
struct SequenceBatch {
  std::vector<TokenId> tokens;
  std::size_t batch = 1;
  std::size_t length = 0;

  std::size_t rows() const { return batch * length; }
};

/// Attention lists plus the duplicated key rows that cache-relative rotary
/// positions need (a key seen at a different offset than its text position).
struct AttentionPlan {
  std::size_t universe_rows = 0;  // extra rows are indexed after these
  AttendList lists;
  std::vector<std::int32_t> extra_source;
  std::vector<std::int64_t> extra_position;
};

/// Plan for a full teacher-forced batch: query row b*L + t sees rows b*L + s
/// admitted by the policy.
AttentionPlan sequence_plan(std::size_t batch, std::size_t length,
                            const arch::AttentionPolicy& policy, arch::PositionMode mode);

/// Appends one query's key list. `keys` are universe rows sorted by text
/// position with the query's own row last; `key_positions` their positions.
void append_query(AttentionPlan& plan, std::int64_t query_position,
                  std::span<const std::int32_t> keys, std::span<const std::int64_t> key_positions,
                  arch::PositionMode mode);

template <typename T>
struct QkvProjection {
  Tensor<T> q;  // unrotated
  Tensor<T> k;  // unrotated
  Tensor<T> v;
};

template <typename T>
QkvProjection<T> project_qkv(Graph<T>& g, const BlockParams<T>& block, const Tensor<T>& h);

/// Keys/values of memory rows under a block's attention norm.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> project_kv(Graph<T>& g, const BlockParams<T>& block,
                                           const Tensor<T>& memory);

/// Rotates queries and keys, appends the plan's duplicated rows, attends.
template <typename T>
Tensor<T> planned_attention(Graph<T>& g, const arch::TransformerSpec& spec, const Tensor<T>& q,
                            std::span<const std::int64_t> q_positions, const Tensor<T>& k,
                            std::span<const std::int64_t> k_positions, const Tensor<T>& v,
                            const AttentionPlan& plan);

/// Output projection, residual, MLP sublayer.
template <typename T>
Tensor<T> finish_block(Graph<T>& g, const BlockParams<T>& block, const Tensor<T>& h,
                       const Tensor<T>& attended);

template <typename T>
Tensor<T> output_logits(Graph<T>& g, const TransformerParams<T>& params, const Tensor<T>& h);

template <typename T>
Tensor<T> embed_tokens(Graph<T>& g, const TransformerParams<T>& params,
                       std::span<const TokenId> tokens);

template <typename T>
struct ForwardResult {
  Tensor<T> logits;               // rows x V
  std::vector<Tensor<T>> trace;   // n_layer + 1 entries, rows x d; [0] is the embedding
};

struct ForwardOptions {
  arch::AttentionPolicy policy;
  arch::PositionMode positions = arch::PositionMode::TextAbsolute;
  std::size_t max_length = 0;  // 0 disables the length check
};

/// Causal teacher-forced forward over a batch of sequences.
template <typename T>
ForwardResult<T> forward_sequence(Graph<T>& g, const TransformerParams<T>& params,
                                  const SequenceBatch& batch, const ForwardOptions& options);

/// Uses the attention policy and position mode of params.spec.
template <typename T>
ForwardResult<T> forward_target(Graph<T>& g, const TransformerParams<T>& params,
                                const SequenceBatch& batch, std::size_t max_length = 0);

}  // namespace specdec_lab::tinymodel
