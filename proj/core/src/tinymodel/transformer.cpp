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

#include "specdec_lab/tinymodel/transformer.hpp"

#include <cmath>

#include "specdec_lab/errors.hpp"
#include "specdec_lab/rng.hpp"

namespace specdec_lab::tinymodel {

namespace {

template <typename T>
Matrix<T> gaussian(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Matrix<T> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<T>(rng.next_normal() * stddev);
  }
  return m;
}

template <typename T>
Matrix<T> ones_row(std::size_t cols) {
  return Matrix<T>::Ones(1, static_cast<Eigen::Index>(cols));
}

template <typename T, typename U>
Tensor<U> cast_param(const Tensor<T>& t) {
  return Tensor<U>::parameter(t.value().template cast<U>());
}

}  // namespace

template <typename T>
TransformerParams<T> TransformerParams<T>::random(const arch::TransformerSpec& spec,
                                                  std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const auto d = spec.d_model;
  const auto kv = spec.kv_dim();
  const double in_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double in_ff = 1.0 / std::sqrt(static_cast<double>(spec.d_ff));
  const double depth_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(spec.n_layer));

  TransformerParams p;
  p.spec = spec;
  p.embed = Tensor<T>::parameter(gaussian<T>(rng, spec.vocab, d, 1.0));
  for (arch::Count l = 0; l < spec.n_layer; ++l) {
    BlockParams<T> b;
    b.attn_norm = Tensor<T>::parameter(ones_row<T>(d));
    b.wq = Tensor<T>::parameter(gaussian<T>(rng, d, d, in_d));
    b.wk = Tensor<T>::parameter(gaussian<T>(rng, d, kv, in_d));
    b.wv = Tensor<T>::parameter(gaussian<T>(rng, d, kv, in_d));
    b.wo = Tensor<T>::parameter(gaussian<T>(rng, d, d, in_d * depth_scale));
    b.mlp_norm = Tensor<T>::parameter(ones_row<T>(d));
    b.w_up = Tensor<T>::parameter(gaussian<T>(rng, d, spec.d_ff, in_d));
    b.w_down = Tensor<T>::parameter(gaussian<T>(rng, spec.d_ff, d, in_ff * depth_scale));
    p.blocks.push_back(std::move(b));
  }
  p.final_norm = Tensor<T>::parameter(ones_row<T>(d));
  p.unembed = Tensor<T>::parameter(gaussian<T>(rng, d, spec.vocab, in_d));
  return p;
}

template <typename T>
std::vector<Tensor<T>> TransformerParams<T>::parameters() const {
  std::vector<Tensor<T>> out{embed};
  for (const auto& b : blocks) {
    out.insert(out.end(), {b.attn_norm, b.wq, b.wk, b.wv, b.wo, b.mlp_norm, b.w_up, b.w_down});
  }
  out.push_back(final_norm);
  out.push_back(unembed);
  return out;
}

template <typename T>
std::vector<std::string> TransformerParams<T>::parameter_names() const {
  std::vector<std::string> out{"embed"};
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const std::string p = "block" + std::to_string(l) + ".";
    for (const char* n : {"attn_norm", "wq", "wk", "wv", "wo", "mlp_norm", "w_up", "w_down"}) {
      out.push_back(p + n);
    }
  }
  out.emplace_back("final_norm");
  out.emplace_back("unembed");
  return out;
}

template <typename T>
TransformerParams<T> TransformerParams<T>::clone() const {
  return cast<T>();
}

template <typename T>
template <typename U>
TransformerParams<U> TransformerParams<T>::cast() const {
  TransformerParams<U> out;
  out.spec = spec;
  out.embed = cast_param<T, U>(embed);
  for (const auto& b : blocks) {
    BlockParams<U> c;
    c.attn_norm = cast_param<T, U>(b.attn_norm);
    c.wq = cast_param<T, U>(b.wq);
    c.wk = cast_param<T, U>(b.wk);
    c.wv = cast_param<T, U>(b.wv);
    c.wo = cast_param<T, U>(b.wo);
    c.mlp_norm = cast_param<T, U>(b.mlp_norm);
    c.w_up = cast_param<T, U>(b.w_up);
    c.w_down = cast_param<T, U>(b.w_down);
    out.blocks.push_back(std::move(c));
  }
  out.final_norm = cast_param<T, U>(final_norm);
  out.unembed = cast_param<T, U>(unembed);
  return out;
}

template <typename T>
TransformerParams<T> prune_from(const TransformerParams<T>& target, std::size_t layers_kept) {
  TransformerParams<T> full = target.clone();
  TransformerParams<T> out;
  out.spec = arch::prune_spec(target.spec, layers_kept);
  out.embed = full.embed;
  const std::size_t first = full.blocks.size() - layers_kept;
  out.blocks.assign(full.blocks.begin() + static_cast<std::ptrdiff_t>(first), full.blocks.end());
  out.final_norm = full.final_norm;
  out.unembed = full.unembed;
  return out;
}

std::vector<std::vector<bool>> streaming_mask(std::size_t length, std::size_t window,
                                              std::size_t sink) {
  const auto policy = arch::AttentionPolicy::streaming(window, sink);
  std::vector<std::vector<bool>> mask(length, std::vector<bool>(length, false));
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t s = 0; s <= t; ++s) {
      mask[t][s] = policy.admits(t, s);
    }
  }
  return mask;
}

void append_query(AttentionPlan& plan, std::int64_t query_position,
                  std::span<const std::int32_t> keys, std::span<const std::int64_t> key_positions,
                  arch::PositionMode mode) {
  const auto m = static_cast<std::int64_t>(keys.size());
  for (std::int64_t j = 0; j < m; ++j) {
    const auto key = keys[static_cast<std::size_t>(j)];
    if (mode == arch::PositionMode::TextAbsolute) {
      plan.lists.push(key);
      continue;
    }
    // Slot j in a cache of m entries whose last slot is the query itself.
    const std::int64_t virtual_position = query_position - (m - 1 - j);
    if (virtual_position == key_positions[static_cast<std::size_t>(j)]) {
      plan.lists.push(key);
    } else {
      plan.lists.push(static_cast<std::int32_t>(plan.universe_rows + plan.extra_source.size()));
      plan.extra_source.push_back(key);
      plan.extra_position.push_back(virtual_position);
    }
  }
  plan.lists.close_query();
}

AttentionPlan sequence_plan(std::size_t batch, std::size_t length,
                            const arch::AttentionPolicy& policy, arch::PositionMode mode) {
  AttentionPlan plan;
  plan.universe_rows = batch * length;
  std::vector<std::int32_t> keys;
  std::vector<std::int64_t> positions;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t base = b * length;
    for (std::size_t t = 0; t < length; ++t) {
      keys.clear();
      positions.clear();
      for (std::size_t s = 0; s <= t; ++s) {
        if (policy.admits(t, s)) {
          keys.push_back(static_cast<std::int32_t>(base + s));
          positions.push_back(static_cast<std::int64_t>(s));
        }
      }
      append_query(plan, static_cast<std::int64_t>(t), keys, positions, mode);
    }
  }
  return plan;
}

template <typename T>
QkvProjection<T> project_qkv(Graph<T>& g, const BlockParams<T>& block, const Tensor<T>& h) {
  const Tensor<T> a = g.rmsnorm(h, block.attn_norm);
  return {g.matmul(a, block.wq), g.matmul(a, block.wk), g.matmul(a, block.wv)};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> project_kv(Graph<T>& g, const BlockParams<T>& block,
                                           const Tensor<T>& memory) {
  const Tensor<T> a = g.rmsnorm(memory, block.attn_norm);
  return {g.matmul(a, block.wk), g.matmul(a, block.wv)};
}

template <typename T>
Tensor<T> planned_attention(Graph<T>& g, const arch::TransformerSpec& spec, const Tensor<T>& q,
                            std::span<const std::int64_t> q_positions, const Tensor<T>& k,
                            std::span<const std::int64_t> k_positions, const Tensor<T>& v,
                            const AttentionPlan& plan) {
  if (static_cast<std::size_t>(k.rows()) != plan.universe_rows) {
    throw InvalidArgument("planned_attention: key rows do not match the plan");
  }
  const std::size_t dh = spec.d_head;
  const Tensor<T> q_rot = g.rope(q, q_positions, dh);
  Tensor<T> k_rot = g.rope(k, k_positions, dh);
  Tensor<T> v_all = v;
  if (!plan.extra_source.empty()) {
    const Tensor<T> extra_k = g.rope(g.gather_rows(k, plan.extra_source), plan.extra_position, dh);
    const Tensor<T> extra_v = g.gather_rows(v, plan.extra_source);
    const Tensor<T> kparts[] = {k_rot, extra_k};
    const Tensor<T> vparts[] = {v, extra_v};
    k_rot = g.concat_rows(kparts);
    v_all = g.concat_rows(vparts);
  }
  return g.attention(q_rot, k_rot, v_all, plan.lists,
                     HeadLayout{spec.n_heads, spec.n_kv_heads, spec.d_head});
}

template <typename T>
Tensor<T> finish_block(Graph<T>& g, const BlockParams<T>& block, const Tensor<T>& h,
                       const Tensor<T>& attended) {
  const Tensor<T> h1 = g.add(h, g.matmul(attended, block.wo));
  const Tensor<T> m = g.gelu(g.matmul(g.rmsnorm(h1, block.mlp_norm), block.w_up));
  return g.add(h1, g.matmul(m, block.w_down));
}

template <typename T>
Tensor<T> output_logits(Graph<T>& g, const TransformerParams<T>& params, const Tensor<T>& h) {
  return g.matmul(g.rmsnorm(h, params.final_norm), params.unembed);
}

template <typename T>
Tensor<T> embed_tokens(Graph<T>& g, const TransformerParams<T>& params,
                       std::span<const TokenId> tokens) {
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<arch::Count>(t) >= params.spec.vocab) {
      throw InvalidArgument("token id outside vocabulary");
    }
  }
  return g.gather_rows(params.embed, tokens);
}

template <typename T>
ForwardResult<T> forward_sequence(Graph<T>& g, const TransformerParams<T>& params,
                                  const SequenceBatch& batch, const ForwardOptions& options) {
  if (batch.length == 0 || batch.tokens.size() != batch.rows()) {
    throw InvalidArgument("forward: token count does not match batch x length");
  }
  if (options.max_length != 0 && batch.length > options.max_length) {
    throw InvalidArgument("forward: sequence longer than the trained maximum");
  }
  const AttentionPlan plan =
      sequence_plan(batch.batch, batch.length, options.policy, options.positions);
  std::vector<std::int64_t> positions(batch.rows());
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    positions[r] = static_cast<std::int64_t>(r % batch.length);
  }

  ForwardResult<T> out;
  Tensor<T> h = embed_tokens(g, params, batch.tokens);
  out.trace.push_back(h);
  for (const auto& block : params.blocks) {
    const auto qkv = project_qkv(g, block, h);
    const Tensor<T> z =
        planned_attention(g, params.spec, qkv.q, positions, qkv.k, positions, qkv.v, plan);
    h = finish_block(g, block, h, z);
    out.trace.push_back(h);
  }
  out.logits = output_logits(g, params, h);
  return out;
}

template <typename T>
ForwardResult<T> forward_target(Graph<T>& g, const TransformerParams<T>& params,
                                const SequenceBatch& batch, std::size_t max_length) {
  return forward_sequence(g, params, batch,
                          ForwardOptions{params.spec.attention, params.spec.positions, max_length});
}

#define SPECDEC_LAB_INSTANTIATE(T)                                                               \
  template struct TransformerParams<T>;                                                          \
  template TransformerParams<T> prune_from(const TransformerParams<T>&, std::size_t);            \
  template QkvProjection<T> project_qkv(Graph<T>&, const BlockParams<T>&, const Tensor<T>&);     \
  template std::pair<Tensor<T>, Tensor<T>> project_kv(Graph<T>&, const BlockParams<T>&,          \
                                                      const Tensor<T>&);                         \
  template Tensor<T> planned_attention(Graph<T>&, const arch::TransformerSpec&, const Tensor<T>&, \
                                       std::span<const std::int64_t>, const Tensor<T>&,          \
                                       std::span<const std::int64_t>, const Tensor<T>&,          \
                                       const AttentionPlan&);                                    \
  template Tensor<T> finish_block(Graph<T>&, const BlockParams<T>&, const Tensor<T>&,            \
                                  const Tensor<T>&);                                             \
  template Tensor<T> output_logits(Graph<T>&, const TransformerParams<T>&, const Tensor<T>&);    \
  template Tensor<T> embed_tokens(Graph<T>&, const TransformerParams<T>&,                        \
                                  std::span<const TokenId>);                                     \
  template ForwardResult<T> forward_sequence(Graph<T>&, const TransformerParams<T>&,             \
                                             const SequenceBatch&, const ForwardOptions&);       \
  template ForwardResult<T> forward_target(Graph<T>&, const TransformerParams<T>&,               \
                                           const SequenceBatch&, std::size_t);

SPECDEC_LAB_INSTANTIATE(float)
SPECDEC_LAB_INSTANTIATE(double)
#undef SPECDEC_LAB_INSTANTIATE

template TransformerParams<double> TransformerParams<float>::cast<double>() const;
template TransformerParams<float> TransformerParams<double>::cast<float>() const;

}  // namespace specdec_lab::tinymodel
