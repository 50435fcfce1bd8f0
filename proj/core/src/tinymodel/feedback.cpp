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

#include "specdec_lab/tinymodel/feedback.hpp"

#include "specdec_lab/errors.hpp"

namespace specdec_lab::tinymodel {

template <typename T>
SpireParams<T> SpireParams<T>::from_target(const TransformerParams<T>& target,
                                           std::size_t layers_kept,
                                           const arch::AttentionPolicy& policy) {
  SpireParams out;
  out.body = prune_from(target, layers_kept);
  out.body.spec.attention = policy;
  out.body.spec.positions = arch::PositionMode::TextAbsolute;
  out.substitution_offset = target.blocks.size() - layers_kept;
  Matrix<T> mix = Matrix<T>::Zero(static_cast<Eigen::Index>(layers_kept),
                                  static_cast<Eigen::Index>(layers_kept + 1));
  for (std::size_t i = 0; i < layers_kept; ++i) {
    mix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
        static_cast<T>(kInitialMixLogit);
  }
  out.mix = Tensor<T>::parameter(std::move(mix));
  return out;
}

template <typename T>
std::vector<Tensor<T>> SpireParams<T>::parameters() const {
  auto out = body.parameters();
  out.push_back(mix);
  return out;
}

template <typename T>
std::vector<std::string> SpireParams<T>::parameter_names() const {
  auto out = body.parameter_names();
  out.emplace_back("feedback_mix");
  return out;
}

template <typename T>
SpireParams<T> SpireParams<T>::clone() const {
  return cast<T>();
}

template <typename T>
template <typename U>
SpireParams<U> SpireParams<T>::cast() const {
  SpireParams<U> out;
  out.body = body.template cast<U>();
  out.mix = Tensor<U>::parameter(mix.value().template cast<U>());
  out.substitution_offset = substitution_offset;
  return out;
}

template <typename T>
Tensor<T> memory_vectors(Graph<T>& g, std::span<const Tensor<T>> trace, const Tensor<T>& mix,
                         std::size_t layer) {
  return g.mix_layers(trace, mix, layer);
}

template <typename T>
Tensor<T> spire_train_forward(Graph<T>& g, const SpireParams<T>& params,
                              const SequenceBatch& batch,
                              std::span<const Tensor<T>> target_trace, std::size_t depth) {
  const auto& spec = params.body.spec;
  const std::size_t n_layer = params.body.blocks.size();
  const std::size_t length = batch.length;
  const std::size_t rows = batch.rows();
  if (depth == 0 || length == 0 || length % depth != 0) {
    throw InvalidArgument("spire_train_forward: sequence length must be a multiple of k");
  }
  if (batch.tokens.size() != rows) {
    throw InvalidArgument("spire_train_forward: token count does not match batch x length");
  }
  if (target_trace.size() < params.substitution_offset + n_layer) {
    throw InvalidArgument("spire_train_forward: target trace too shallow for the offset");
  }
  for (const auto& y : target_trace) {
    if (static_cast<std::size_t>(y.rows()) != rows || y.cols() != params.body.embed.cols()) {
      throw InvalidArgument("spire_train_forward: target trace shape mismatch");
    }
  }

  const std::size_t blocks_per_seq = length / depth;
  const std::size_t nq = batch.batch * blocks_per_seq;

  // Out-of-block memories are target activations for every position.
  std::vector<Tensor<T>> k_out(n_layer);
  std::vector<Tensor<T>> v_out(n_layer);
  for (std::size_t i = 0; i < n_layer; ++i) {
    auto [k, v] = project_kv(g, params.body.blocks[i], target_trace[i + params.substitution_offset]);
    k_out[i] = k;
    v_out[i] = v;
  }
  std::vector<std::int64_t> out_positions(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out_positions[r] = static_cast<std::int64_t>(r % length);
  }

  // k_in[i][p]: draft memory keys of pass p for layer i, one row per block.
  std::vector<std::vector<Tensor<T>>> k_in(n_layer);
  std::vector<std::vector<Tensor<T>>> v_in(n_layer);
  std::vector<Tensor<T>> pass_logits;
  std::vector<std::int32_t> natural_to_concat(rows);

  for (std::size_t pass = 0; pass < depth; ++pass) {
    std::vector<TokenId> tokens(nq);
    std::vector<std::int64_t> q_positions(nq);
    for (std::size_t b = 0; b < batch.batch; ++b) {
      for (std::size_t m = 0; m < blocks_per_seq; ++m) {
        const std::size_t qi = b * blocks_per_seq + m;
        const std::size_t t = m * depth + pass;
        tokens[qi] = batch.tokens[b * length + t];
        q_positions[qi] = static_cast<std::int64_t>(t);
        natural_to_concat[b * length + t] = static_cast<std::int32_t>(pass * nq + qi);
      }
    }

    // Universe rows: [k_out (rows)] [pass 0 .. pass-1 memories (nq each)] [self (nq)].
    AttentionPlan plan;
    plan.universe_rows = rows + (pass + 1) * nq;
    std::vector<std::int64_t> k_positions(out_positions);
    for (std::size_t p = 0; p <= pass; ++p) {
      for (std::size_t qi = 0; qi < nq; ++qi) {
        const std::size_t m = qi % blocks_per_seq;
        k_positions.push_back(static_cast<std::int64_t>(m * depth + p));
      }
    }
    std::vector<std::int32_t> keys;
    std::vector<std::int64_t> key_pos;
    for (std::size_t qi = 0; qi < nq; ++qi) {
      const std::size_t b = qi / blocks_per_seq;
      const std::size_t m = qi % blocks_per_seq;
      const std::size_t block_start = m * depth;
      const std::size_t t = block_start + pass;
      keys.clear();
      key_pos.clear();
      for (std::size_t s = 0; s < t; ++s) {
        if (!spec.attention.admits(t, s)) {
          continue;
        }
        const std::size_t row = s >= block_start ? rows + (s - block_start) * nq + qi
                                                 : b * length + s;
        keys.push_back(static_cast<std::int32_t>(row));
        key_pos.push_back(static_cast<std::int64_t>(s));
      }
      keys.push_back(static_cast<std::int32_t>(rows + pass * nq + qi));
      key_pos.push_back(static_cast<std::int64_t>(t));
      append_query(plan, static_cast<std::int64_t>(t), keys, key_pos, spec.positions);
    }

    std::vector<Tensor<T>> trace;
    Tensor<T> h = embed_tokens(g, params.body, tokens);
    trace.push_back(h);
    for (std::size_t i = 0; i < n_layer; ++i) {
      const auto& block = params.body.blocks[i];
      const auto qkv = project_qkv(g, block, h);
      std::vector<Tensor<T>> kparts{k_out[i]};
      std::vector<Tensor<T>> vparts{v_out[i]};
      kparts.insert(kparts.end(), k_in[i].begin(), k_in[i].end());
      vparts.insert(vparts.end(), v_in[i].begin(), v_in[i].end());
      kparts.push_back(qkv.k);
      vparts.push_back(qkv.v);
      const Tensor<T> k_all = g.concat_rows(kparts);
      const Tensor<T> v_all = g.concat_rows(vparts);
      const Tensor<T> z =
          planned_attention(g, spec, qkv.q, q_positions, k_all, k_positions, v_all, plan);
      h = finish_block(g, block, h, z);
      trace.push_back(h);
    }
    pass_logits.push_back(output_logits(g, params.body, h));

    if (pass + 1 < depth) {
      for (std::size_t i = 0; i < n_layer; ++i) {
        const Tensor<T> memory = memory_vectors<T>(g, trace, params.mix, i);
        auto [k, v] = project_kv(g, params.body.blocks[i], memory);
        k_in[i].push_back(k);
        v_in[i].push_back(v);
      }
    }
  }

  return g.gather_rows(g.concat_rows(pass_logits), natural_to_concat);
}

#define SPECDEC_LAB_INSTANTIATE(T)                                                            \
  template struct SpireParams<T>;                                                             \
  template Tensor<T> memory_vectors(Graph<T>&, std::span<const Tensor<T>>, const Tensor<T>&,  \
                                    std::size_t);                                             \
  template Tensor<T> spire_train_forward(Graph<T>&, const SpireParams<T>&,                    \
                                         const SequenceBatch&, std::span<const Tensor<T>>,    \
                                         std::size_t);

SPECDEC_LAB_INSTANTIATE(float)
SPECDEC_LAB_INSTANTIATE(double)
#undef SPECDEC_LAB_INSTANTIATE

template SpireParams<double> SpireParams<float>::cast<double>() const;
template SpireParams<float> SpireParams<double>::cast<float>() const;

}  // namespace specdec_lab::tinymodel
