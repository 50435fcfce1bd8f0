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

#include "specdec_lab/arch.hpp"
#include "specdec_lab/specdec.hpp"
#include "specdec_lab/tinymodel/feedback.hpp"
#include "specdec_lab/tinymodel/transformer.hpp"

namespace specdec_lab::tinymodel {

/// A draft for measurement. MagicDec reuses the target weights under the
/// given streaming policy with cache-relative positions.
struct DraftModel {
  arch::DraftKindTag kind = arch::DraftKindTag::VanillaSmall;
  const TransformerParams<float>* transformer = nullptr;  // VanillaSmall
  const SpireParams<float>* spire = nullptr;              // SPIRe
  arch::AttentionPolicy magicdec_policy;                  // MagicDec

  static DraftModel vanilla(const TransformerParams<float>& params);
  static DraftModel magicdec(const arch::AttentionPolicy& policy);
  static DraftModel feedback(const SpireParams<float>& params);
};

struct TauMeasurement {
  specdec::TauEstimate estimate;
  std::vector<std::size_t> emitted;  // per round, contexts in order
  std::size_t draft_forwards = 0;
  std::size_t max_draft_cache = 0;   // largest per-layer draft cache seen
};

/// Generates at least `generate` tokens after each context by speculative
/// rounds of depth `k` (draft tokens are sampled from q). Contexts are
/// processed in parallel with per-context seeds derive_seed(seed, index).
TauMeasurement measure_tau(const TransformerParams<float>& target, const DraftModel& draft,
                           std::span<const std::vector<TokenId>> contexts, std::size_t generate,
                           std::size_t k, std::uint64_t seed);

/// softmax of a logits row, computed in double.
specdec::CategoricalDist distribution_from_logits(const float* logits, std::size_t vocab);

}  // namespace specdec_lab::tinymodel
