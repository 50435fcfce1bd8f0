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

#include <cstdint>
#include <string>
#include <string_view>

namespace specdec_lab::arch {

using Count = std::uint64_t;
using Flops = std::uint64_t;
using Bytes = std::uint64_t;

enum class AttentionKind { Dense, Streaming };

/// Which cached positions a query may attend to. Streaming keeps `sink`
/// leading positions plus the trailing `window` positions (self included).
struct AttentionPolicy {
  AttentionKind kind = AttentionKind::Dense;
  Count window = 0;
  Count sink = 0;

  static AttentionPolicy dense() { return {}; }
  static AttentionPolicy streaming(Count window, Count sink);

  bool is_streaming() const { return kind == AttentionKind::Streaming; }

  /// Number of positions attended by the last query of a length-L context.
  Count attended_length(Count context_length) const;

  /// Whether a query at 0-based position `query` sees key position `key`.
  bool admits(Count query, Count key) const;

  friend bool operator==(const AttentionPolicy&, const AttentionPolicy&) = default;
};

/// Rotary positions: absolute text index, or slot index inside the
/// (possibly sparse) cache as seen from the query.
enum class PositionMode { TextAbsolute, CacheRelative };

struct TransformerSpec {
  Count n_layer = 0;
  Count d_model = 0;
  Count n_heads = 0;
  Count n_kv_heads = 0;
  Count d_head = 0;
  Count d_ff = 0;
  Count vocab = 0;
  Count bytes_per_param = 2;
  AttentionPolicy attention;
  PositionMode positions = PositionMode::TextAbsolute;

  Count kv_dim() const { return n_kv_heads * d_head; }

  /// Throws InvalidArgument when a structural invariant does not hold.
  /// n_layer = 0 is accepted only when `allow_empty_body` is set.
  void validate(bool allow_empty_body = false) const;

  friend bool operator==(const TransformerSpec&, const TransformerSpec&) = default;
};

enum class DraftKindTag { VanillaSmall, MagicDec, SPIRe };

std::string_view to_string(DraftKindTag kind);
DraftKindTag draft_kind_from_string(std::string_view name);

struct DraftKind {
  DraftKindTag kind;
  TransformerSpec spec;
};

/// Q/O are d_model x d_model, K/V are d_model x kv_dim, MLP is two
/// d_model x d_ff matrices. Embedding, unembedding, norms and biases excluded.
Count body_params(const TransformerSpec& spec);

/// 2 FLOPs per MAC over the body plus the QK^T and AV products.
Flops decode_flops_per_token(const TransformerSpec& spec, Count context_length);

Bytes weight_bytes(const TransformerSpec& spec);

/// KV growth during a round of speculation is not counted.
Bytes kv_bytes(const TransformerSpec& spec, Count context_length, Count batch);

/// Keeps the top `layers_kept` blocks of the target; widths unchanged.
TransformerSpec prune_spec(const TransformerSpec& target, Count layers_kept);

DraftKind make_vanilla_draft(const TransformerSpec& target, Count layers_kept = 0);
DraftKind make_magicdec_draft(const TransformerSpec& target, Count window, Count sink);
DraftKind make_spire_draft(const TransformerSpec& target, Count layers_kept, Count window,
                           Count sink);

/// Checks the per-kind relationship to the target (MagicDec identical except
/// attention, SPIRe width-matched). Throws InvalidArgument.
void validate_draft(const DraftKind& draft, const TransformerSpec& target);

/// 8 x 768 multi-head target, d_ff = 4 d_model, byte-pair vocab, 2-byte params.
TransformerSpec default_target_spec();

}  // namespace specdec_lab::arch
