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
#include <vector>

#include "specdec_lab/tinymodel/feedback.hpp"
#include "specdec_lab/tinymodel/transformer.hpp"

namespace specdec_lab::tinymodel {

/// Per-layer key/value rows ordered by text position. Under a streaming
/// policy at most window + sink rows are held; the oldest non-sink row is
/// evicted first. Rows evicted while speculating are journaled so a round
/// can be rolled back without recomputation.
template <typename T>
class KvCache {
 public:
  KvCache(const arch::AttentionPolicy& policy, std::size_t width);

  std::size_t size() const { return positions_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::span<const std::int64_t> positions() const { return positions_; }
  const T* key(std::size_t i) const { return keys_.data() + i * width_; }
  const T* value(std::size_t i) const { return values_.data() + i * width_; }
  std::size_t width() const { return width_; }

  void insert(std::int64_t position, const T* key, const T* value);
  /// Drops rows at or after `position` (no journaling).
  void truncate(std::int64_t position);

  void begin_speculation();
  /// Drops rows at or after `keep_before`, restores journaled rows and
  /// re-applies the capacity bound.
  void end_speculation(std::int64_t keep_before);
  bool speculating() const { return speculating_; }

 private:
  struct Row {
    std::int64_t position;
    std::vector<T> key;
    std::vector<T> value;
  };
  void evict_to_capacity(bool journal);
  void erase_at(std::size_t index);
  void insert_row(std::int64_t position, const T* key, const T* value);

  arch::AttentionPolicy policy_;
  std::size_t width_;
  std::size_t capacity_;
  std::vector<std::int64_t> positions_;
  std::vector<T> keys_;
  std::vector<T> values_;
  bool speculating_ = false;
  std::vector<Row> journal_;
};

/// Incremental decoding for a plain transformer (target, vanilla draft or
/// MagicDec self-draft) using the attention policy and position mode of its spec.
template <typename T>
class DecoderSession {
 public:
  explicit DecoderSession(const TransformerParams<T>& params, bool keep_trace = false,
                          std::size_t max_length = 0);

  /// Processes tokens at positions length()..; returns their logits rows.
  Matrix<T> step(std::span<const TokenId> tokens);

  std::size_t length() const { return length_; }
  /// Largest number of rows any layer's cache holds right now.
  std::size_t cached_positions() const;
  std::size_t forward_passes() const { return forward_passes_; }

  void begin_speculation();
  /// Keeps positions [0, new_length).
  void commit(std::size_t new_length);

  /// Activations of all layers ([n_layer + 1] x d) at a processed position.
  const Matrix<T>& trace_at(std::size_t position) const;

  const TransformerParams<T>& params() const { return params_; }

 private:
  const TransformerParams<T>& params_;
  bool keep_trace_;
  std::size_t max_length_;
  std::size_t length_ = 0;
  std::size_t forward_passes_ = 0;
  std::vector<KvCache<T>> caches_;
  std::vector<Matrix<T>> trace_;
};

/// Incremental feedback-memory drafting. Committed positions hold memories
/// derived from target activations; positions drafted in the current round
/// hold the draft's own mixed memories until the round is committed.
template <typename T>
class SpireSession {
 public:
  explicit SpireSession(const SpireParams<T>& params);

  /// Installs target-derived memories for [from, to); `to` is the next
  /// query position. Rows no future query can attend are skipped.
  void absorb_target(const DecoderSession<T>& target, std::size_t from, std::size_t to);

  /// One draft forward at position length(); returns its logits row.
  Matrix<T> step(TokenId token);

  std::size_t length() const { return length_; }
  std::size_t cached_positions() const;
  std::size_t forward_passes() const { return forward_passes_; }

  void begin_speculation();
  /// Drops this round's draft memories and replaces them with target
  /// memories for [round start, new_length).
  void commit(std::size_t new_length, const DecoderSession<T>& target);

 private:
  const SpireParams<T>& params_;
  std::size_t length_ = 0;
  std::size_t round_start_ = 0;
  std::size_t forward_passes_ = 0;
  std::vector<KvCache<T>> caches_;
};

}  // namespace specdec_lab::tinymodel
