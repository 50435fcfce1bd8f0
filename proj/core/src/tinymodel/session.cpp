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

#include "specdec_lab/tinymodel/session.hpp"

#include <algorithm>
#include <limits>

#include "specdec_lab/errors.hpp"

namespace specdec_lab::tinymodel {

template <typename T>
KvCache<T>::KvCache(const arch::AttentionPolicy& policy, std::size_t width)
    : policy_(policy),
      width_(width),
      capacity_(policy.is_streaming() ? policy.window + policy.sink
                                      : std::numeric_limits<std::size_t>::max()) {}

template <typename T>
void KvCache<T>::insert_row(std::int64_t position, const T* key, const T* value) {
  const auto it = std::lower_bound(positions_.begin(), positions_.end(), position);
  const auto index = static_cast<std::size_t>(it - positions_.begin());
  if (it != positions_.end() && *it == position) {
    std::copy(key, key + width_, keys_.begin() + static_cast<std::ptrdiff_t>(index * width_));
    std::copy(value, value + width_, values_.begin() + static_cast<std::ptrdiff_t>(index * width_));
    return;
  }
  positions_.insert(it, position);
  keys_.insert(keys_.begin() + static_cast<std::ptrdiff_t>(index * width_), key, key + width_);
  values_.insert(values_.begin() + static_cast<std::ptrdiff_t>(index * width_), value,
                 value + width_);
}

template <typename T>
void KvCache<T>::erase_at(std::size_t index) {
  positions_.erase(positions_.begin() + static_cast<std::ptrdiff_t>(index));
  const auto first = static_cast<std::ptrdiff_t>(index * width_);
  const auto last = first + static_cast<std::ptrdiff_t>(width_);
  keys_.erase(keys_.begin() + first, keys_.begin() + last);
  values_.erase(values_.begin() + first, values_.begin() + last);
}

template <typename T>
void KvCache<T>::evict_to_capacity(bool journal) {
  while (positions_.size() > capacity_) {
    // Oldest row outside the sink.
    const auto sink = static_cast<std::int64_t>(policy_.sink);
    const auto it = std::lower_bound(positions_.begin(), positions_.end(), sink);
    if (it == positions_.end()) {
      break;
    }
    const auto index = static_cast<std::size_t>(it - positions_.begin());
    if (journal) {
      journal_.push_back(Row{positions_[index],
                             std::vector<T>(key(index), key(index) + width_),
                             std::vector<T>(value(index), value(index) + width_)});
    }
    erase_at(index);
  }
}

template <typename T>
void KvCache<T>::insert(std::int64_t position, const T* key, const T* value) {
  insert_row(position, key, value);
  evict_to_capacity(speculating_);
}

template <typename T>
void KvCache<T>::truncate(std::int64_t position) {
  const auto it = std::lower_bound(positions_.begin(), positions_.end(), position);
  const auto index = static_cast<std::size_t>(it - positions_.begin());
  positions_.erase(it, positions_.end());
  keys_.resize(index * width_);
  values_.resize(index * width_);
}

template <typename T>
void KvCache<T>::begin_speculation() {
  speculating_ = true;
  journal_.clear();
}

template <typename T>
void KvCache<T>::end_speculation(std::int64_t keep_before) {
  truncate(keep_before);
  for (const auto& row : journal_) {
    if (row.position < keep_before) {
      insert_row(row.position, row.key.data(), row.value.data());
    }
  }
  journal_.clear();
  speculating_ = false;
  evict_to_capacity(false);
}

namespace {

struct CachedAttention {
  AttentionPlan plan;
  std::vector<std::int64_t> key_positions;
};

template <typename T>
CachedAttention plan_against_cache(const KvCache<T>& cache,
                                   std::span<const std::int64_t> new_positions,
                                   const arch::AttentionPolicy& policy,
                                   arch::PositionMode mode) {
  CachedAttention out;
  const std::size_t cached = cache.size();
  out.plan.universe_rows = cached + new_positions.size();
  out.key_positions.assign(cache.positions().begin(), cache.positions().end());
  out.key_positions.insert(out.key_positions.end(), new_positions.begin(), new_positions.end());
  std::vector<std::int32_t> keys;
  std::vector<std::int64_t> key_pos;
  for (std::size_t r = 0; r < new_positions.size(); ++r) {
    const std::int64_t t = new_positions[r];
    keys.clear();
    key_pos.clear();
    for (std::size_t i = 0; i < cached; ++i) {
      const std::int64_t s = cache.positions()[i];
      if (s < t && policy.admits(static_cast<arch::Count>(t), static_cast<arch::Count>(s))) {
        keys.push_back(static_cast<std::int32_t>(i));
        key_pos.push_back(s);
      }
    }
    for (std::size_t j = 0; j <= r; ++j) {
      const std::int64_t s = new_positions[j];
      if (policy.admits(static_cast<arch::Count>(t), static_cast<arch::Count>(s))) {
        keys.push_back(static_cast<std::int32_t>(cached + j));
        key_pos.push_back(s);
      }
    }
    append_query(out.plan, t, keys, key_pos, mode);
  }
  return out;
}

template <typename T>
Matrix<T> cache_matrix(const KvCache<T>& cache, bool keys) {
  Matrix<T> m(static_cast<Eigen::Index>(cache.size()), static_cast<Eigen::Index>(cache.width()));
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const T* src = keys ? cache.key(i) : cache.value(i);
    std::copy(src, src + cache.width(), m.row(static_cast<Eigen::Index>(i)).data());
  }
  return m;
}

/// Attention of new rows against cached rows plus themselves.
template <typename T>
Tensor<T> attend_cached(Graph<T>& g, const arch::TransformerSpec& spec,
                        const QkvProjection<T>& qkv, const KvCache<T>& cache,
                        std::span<const std::int64_t> positions) {
  const CachedAttention ca = plan_against_cache(cache, positions, spec.attention, spec.positions);
  const Tensor<T> kparts[] = {g.constant(cache_matrix(cache, true)), qkv.k};
  const Tensor<T> vparts[] = {g.constant(cache_matrix(cache, false)), qkv.v};
  return planned_attention(g, spec, qkv.q, positions, g.concat_rows(kparts), ca.key_positions,
                           g.concat_rows(vparts), ca.plan);
}

}  // namespace

template <typename T>
DecoderSession<T>::DecoderSession(const TransformerParams<T>& params, bool keep_trace,
                                  std::size_t max_length)
    : params_(params), keep_trace_(keep_trace), max_length_(max_length) {
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    caches_.emplace_back(params.spec.attention, params.spec.kv_dim());
  }
}

template <typename T>
Matrix<T> DecoderSession<T>::step(std::span<const TokenId> tokens) {
  if (tokens.empty()) {
    throw InvalidArgument("DecoderSession::step: no tokens");
  }
  if (max_length_ != 0 && length_ + tokens.size() > max_length_) {
    throw InvalidArgument("DecoderSession::step: sequence exceeds the trained maximum length");
  }
  Graph<T> g(false);
  std::vector<std::int64_t> positions(tokens.size());
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    positions[r] = static_cast<std::int64_t>(length_ + r);
  }
  std::vector<Matrix<T>> layer_outputs;
  Tensor<T> h = embed_tokens(g, params_, tokens);
  if (keep_trace_) {
    layer_outputs.push_back(h.value());
  }
  for (std::size_t l = 0; l < params_.blocks.size(); ++l) {
    const auto& block = params_.blocks[l];
    const auto qkv = project_qkv(g, block, h);
    const Tensor<T> z = attend_cached(g, params_.spec, qkv, caches_[l], positions);
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      caches_[l].insert(positions[r], qkv.k.value().row(static_cast<Eigen::Index>(r)).data(),
                        qkv.v.value().row(static_cast<Eigen::Index>(r)).data());
    }
    h = finish_block(g, block, h, z);
    if (keep_trace_) {
      layer_outputs.push_back(h.value());
    }
  }
  if (keep_trace_) {
    const auto width = static_cast<Eigen::Index>(params_.spec.d_model);
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      Matrix<T> rows(static_cast<Eigen::Index>(layer_outputs.size()), width);
      for (std::size_t l = 0; l < layer_outputs.size(); ++l) {
        rows.row(static_cast<Eigen::Index>(l)) =
            layer_outputs[l].row(static_cast<Eigen::Index>(r));
      }
      trace_.push_back(std::move(rows));
    }
  }
  length_ += tokens.size();
  ++forward_passes_;
  return output_logits(g, params_, h).value();
}

template <typename T>
std::size_t DecoderSession<T>::cached_positions() const {
  std::size_t out = 0;
  for (const auto& c : caches_) {
    out = std::max(out, c.size());
  }
  return out;
}

template <typename T>
void DecoderSession<T>::begin_speculation() {
  for (auto& c : caches_) {
    c.begin_speculation();
  }
}

template <typename T>
void DecoderSession<T>::commit(std::size_t new_length) {
  if (new_length > length_) {
    throw InvalidArgument("DecoderSession::commit: cannot commit unprocessed positions");
  }
  for (auto& c : caches_) {
    if (c.speculating()) {
      c.end_speculation(static_cast<std::int64_t>(new_length));
    } else {
      c.truncate(static_cast<std::int64_t>(new_length));
    }
  }
  if (keep_trace_) {
    trace_.resize(new_length);
  }
  length_ = new_length;
}

template <typename T>
const Matrix<T>& DecoderSession<T>::trace_at(std::size_t position) const {
  if (!keep_trace_ || position >= trace_.size()) {
    throw InvalidArgument("DecoderSession::trace_at: no activations for this position");
  }
  return trace_[position];
}

template <typename T>
SpireSession<T>::SpireSession(const SpireParams<T>& params) : params_(params) {
  for (std::size_t l = 0; l < params.body.blocks.size(); ++l) {
    caches_.emplace_back(params.body.spec.attention, params.body.spec.kv_dim());
  }
}

template <typename T>
void SpireSession<T>::absorb_target(const DecoderSession<T>& target, std::size_t from,
                                    std::size_t to) {
  const auto& policy = params_.body.spec.attention;
  std::vector<std::size_t> kept;
  for (std::size_t pos = from; pos < to; ++pos) {
    if (!policy.is_streaming() || pos < policy.sink || pos + policy.window > to) {
      kept.push_back(pos);
    }
  }
  if (kept.empty()) {
    length_ = std::max(length_, to);
    return;
  }
  const std::size_t n_layer = params_.body.blocks.size();
  if (target.trace_at(kept.front()).rows() <
      static_cast<Eigen::Index>(params_.substitution_offset + n_layer)) {
    throw InvalidArgument("SpireSession: target trace too shallow for the substitution offset");
  }
  Graph<T> g(false);
  const auto width = static_cast<Eigen::Index>(params_.body.spec.d_model);
  for (std::size_t i = 0; i < n_layer; ++i) {
    Matrix<T> memory(static_cast<Eigen::Index>(kept.size()), width);
    for (std::size_t r = 0; r < kept.size(); ++r) {
      memory.row(static_cast<Eigen::Index>(r)) = target.trace_at(kept[r]).row(
          static_cast<Eigen::Index>(i + params_.substitution_offset));
    }
    auto [k, v] = project_kv(g, params_.body.blocks[i], g.constant(std::move(memory)));
    for (std::size_t r = 0; r < kept.size(); ++r) {
      caches_[i].insert(static_cast<std::int64_t>(kept[r]),
                        k.value().row(static_cast<Eigen::Index>(r)).data(),
                        v.value().row(static_cast<Eigen::Index>(r)).data());
    }
  }
  length_ = std::max(length_, to);
}

template <typename T>
Matrix<T> SpireSession<T>::step(TokenId token) {
  Graph<T> g(false);
  const std::int64_t position = static_cast<std::int64_t>(length_);
  const std::int64_t positions[] = {position};
  const TokenId tokens[] = {token};
  std::vector<Tensor<T>> trace;
  Tensor<T> h = embed_tokens(g, params_.body, tokens);
  trace.push_back(h);
  for (std::size_t i = 0; i < params_.body.blocks.size(); ++i) {
    const auto& block = params_.body.blocks[i];
    const auto qkv = project_qkv(g, block, h);
    const Tensor<T> z = attend_cached(g, params_.body.spec, qkv, caches_[i], positions);
    h = finish_block(g, block, h, z);
    trace.push_back(h);
  }
  for (std::size_t i = 0; i < params_.body.blocks.size(); ++i) {
    const Tensor<T> memory = memory_vectors<T>(g, trace, params_.mix, i);
    auto [k, v] = project_kv(g, params_.body.blocks[i], memory);
    caches_[i].insert(position, k.value().data(), v.value().data());
  }
  ++length_;
  ++forward_passes_;
  return output_logits(g, params_.body, h).value();
}

template <typename T>
std::size_t SpireSession<T>::cached_positions() const {
  std::size_t out = 0;
  for (const auto& c : caches_) {
    out = std::max(out, c.size());
  }
  return out;
}

template <typename T>
void SpireSession<T>::begin_speculation() {
  round_start_ = length_;
  for (auto& c : caches_) {
    c.begin_speculation();
  }
}

template <typename T>
void SpireSession<T>::commit(std::size_t new_length, const DecoderSession<T>& target) {
  for (auto& c : caches_) {
    c.end_speculation(static_cast<std::int64_t>(round_start_));
  }
  length_ = round_start_;
  absorb_target(target, round_start_, new_length);
  length_ = new_length;
}

template class KvCache<float>;
template class KvCache<double>;
template class DecoderSession<float>;
template class DecoderSession<double>;
template class SpireSession<float>;
template class SpireSession<double>;

}  // namespace specdec_lab::tinymodel
