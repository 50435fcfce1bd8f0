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

#include "specdec_lab/arch.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "specdec_lab/errors.hpp"

namespace specdec_lab::arch {

namespace {

Count checked_mul(Count a, Count b) {
  if (a != 0 && b > std::numeric_limits<Count>::max() / a) {
    throw InvalidArgument("arch: integer overflow in derived quantity");
  }
  return a * b;
}

Count checked_add(Count a, Count b) {
  if (b > std::numeric_limits<Count>::max() - a) {
    throw InvalidArgument("arch: integer overflow in derived quantity");
  }
  return a + b;
}

template <typename... Rest>
Count product(Count first, Rest... rest) {
  Count out = first;
  ((out = checked_mul(out, rest)), ...);
  return out;
}

}  // namespace

AttentionPolicy AttentionPolicy::streaming(Count window, Count sink) {
  if (window < 1) {
    throw InvalidArgument("streaming attention requires window >= 1");
  }
  return AttentionPolicy{AttentionKind::Streaming, window, sink};
}

Count AttentionPolicy::attended_length(Count context_length) const {
  if (kind == AttentionKind::Dense) {
    return context_length;
  }
  return std::min(context_length, window + sink);
}

bool AttentionPolicy::admits(Count query, Count key) const {
  if (key > query) {
    return false;
  }
  if (kind == AttentionKind::Dense) {
    return true;
  }
  return key + window > query || key < sink;
}

void TransformerSpec::validate(bool allow_empty_body) const {
  if (n_layer == 0 && !allow_empty_body) {
    throw InvalidArgument("spec: n_layer must be >= 1");
  }
  if (d_model == 0 || n_heads == 0 || n_kv_heads == 0 || d_head == 0 || d_ff == 0 ||
      vocab == 0 || bytes_per_param == 0) {
    throw InvalidArgument("spec: all counts must be >= 1");
  }
  if (n_heads * d_head != d_model) {
    throw InvalidArgument("spec: n_heads * d_head must equal d_model");
  }
  if (n_heads % n_kv_heads != 0) {
    throw InvalidArgument("spec: n_kv_heads must divide n_heads");
  }
  if (attention.kind == AttentionKind::Streaming && attention.window < 1) {
    throw InvalidArgument("spec: streaming attention requires window >= 1");
  }
}

std::string_view to_string(DraftKindTag kind) {
  switch (kind) {
    case DraftKindTag::VanillaSmall:
      return "vanilla_small";
    case DraftKindTag::MagicDec:
      return "magicdec";
    case DraftKindTag::SPIRe:
      return "spire";
  }
  return "unknown";
}

DraftKindTag draft_kind_from_string(std::string_view name) {
  if (name == "vanilla_small" || name == "vanilla") {
    return DraftKindTag::VanillaSmall;
  }
  if (name == "magicdec") {
    return DraftKindTag::MagicDec;
  }
  if (name == "spire") {
    return DraftKindTag::SPIRe;
  }
  throw InvalidArgument("unknown draft kind '" + std::string(name) + "'");
}

Count body_params(const TransformerSpec& spec) {
  const Count attn = product(2, spec.d_model, checked_add(spec.d_model, spec.kv_dim()));
  const Count mlp = product(2, spec.d_model, spec.d_ff);
  return checked_mul(spec.n_layer, checked_add(attn, mlp));
}

Flops decode_flops_per_token(const TransformerSpec& spec, Count context_length) {
  if (context_length < 1) {
    throw InvalidArgument("decode_flops_per_token: context length must be >= 1");
  }
  const Count attended = spec.attention.attended_length(context_length);
  return checked_add(checked_mul(2, body_params(spec)),
                     product(4, spec.n_layer, spec.d_model, attended));
}

Bytes weight_bytes(const TransformerSpec& spec) {
  return checked_mul(body_params(spec), spec.bytes_per_param);
}

Bytes kv_bytes(const TransformerSpec& spec, Count context_length, Count batch) {
  if (context_length < 1 || batch < 1) {
    throw InvalidArgument("kv_bytes: context length and batch must be >= 1");
  }
  const Count attended = spec.attention.attended_length(context_length);
  return product(batch, 2, spec.n_layer, spec.n_kv_heads, spec.d_head, attended,
                 spec.bytes_per_param);
}

TransformerSpec prune_spec(const TransformerSpec& target, Count layers_kept) {
  if (layers_kept < 1 || layers_kept > target.n_layer) {
    throw InvalidArgument("prune_spec: layers_kept must lie in [1, n_layer]");
  }
  TransformerSpec out = target;
  out.n_layer = layers_kept;
  return out;
}

DraftKind make_vanilla_draft(const TransformerSpec& target, Count layers_kept) {
  if (layers_kept == 0) {
    layers_kept = std::max<Count>(1, target.n_layer / 8);
  }
  TransformerSpec spec = prune_spec(target, layers_kept);
  spec.attention = AttentionPolicy::dense();
  spec.positions = PositionMode::TextAbsolute;
  return {DraftKindTag::VanillaSmall, spec};
}

DraftKind make_magicdec_draft(const TransformerSpec& target, Count window, Count sink) {
  TransformerSpec spec = target;
  spec.attention = AttentionPolicy::streaming(window, sink);
  spec.positions = PositionMode::CacheRelative;
  return {DraftKindTag::MagicDec, spec};
}

DraftKind make_spire_draft(const TransformerSpec& target, Count layers_kept, Count window,
                           Count sink) {
  TransformerSpec spec = prune_spec(target, layers_kept);
  spec.attention = AttentionPolicy::streaming(window, sink);
  spec.positions = PositionMode::TextAbsolute;
  return {DraftKindTag::SPIRe, spec};
}

void validate_draft(const DraftKind& draft, const TransformerSpec& target) {
  draft.spec.validate();
  target.validate();
  if (draft.spec.vocab != target.vocab) {
    throw InvalidArgument("draft and target must share a vocabulary");
  }
  switch (draft.kind) {
    case DraftKindTag::MagicDec: {
      TransformerSpec expected = target;
      expected.attention = draft.spec.attention;
      expected.positions = draft.spec.positions;
      if (!(expected == draft.spec) || !draft.spec.attention.is_streaming()) {
        throw InvalidArgument("magicdec draft must equal the target except for streaming attention");
      }
      break;
    }
    case DraftKindTag::SPIRe:
      if (draft.spec.d_model != target.d_model) {
        throw InvalidArgument("spire draft must match the target embedding dimension");
      }
      break;
    case DraftKindTag::VanillaSmall:
      break;
  }
}

TransformerSpec default_target_spec() {
  TransformerSpec spec;
  spec.n_layer = 8;
  spec.d_model = 768;
  spec.n_heads = 12;
  spec.n_kv_heads = 12;
  spec.d_head = 64;
  spec.d_ff = 4 * 768;
  spec.vocab = 50257;
  spec.bytes_per_param = 2;
  return spec;
}

}  // namespace specdec_lab::arch
