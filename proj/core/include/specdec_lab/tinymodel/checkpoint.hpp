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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "specdec_lab/arch.hpp"
#include "specdec_lab/tinymodel/feedback.hpp"
#include "specdec_lab/tinymodel/transformer.hpp"

namespace specdec_lab::tinymodel {

/// Container layout: "SDLB", u32 version, u64 header length, JSON header,
/// then little-endian float32 parameter blobs in declaration order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind { Transformer, Spire };

struct CheckpointInfo {
  CheckpointKind kind = CheckpointKind::Transformer;
  std::string variant;  // free-form label, e.g. "target" or "spire"
  arch::TransformerSpec spec;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::size_t substitution_offset = 0;
};

std::vector<std::uint8_t> encode_checkpoint(const TransformerParams<float>& params,
                                            const CheckpointInfo& info);
std::vector<std::uint8_t> encode_checkpoint(const SpireParams<float>& params,
                                            const CheckpointInfo& info);

void save_checkpoint(const std::filesystem::path& path, const TransformerParams<float>& params,
                     const CheckpointInfo& info);
void save_checkpoint(const std::filesystem::path& path, const SpireParams<float>& params,
                     const CheckpointInfo& info);

/// Header only. Throws CheckpointMismatch on a malformed container.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Throws CheckpointMismatch when the stored kind or spec differs from
/// `expected` (if given) or a blob has the wrong shape.
TransformerParams<float> load_transformer(const std::filesystem::path& path,
                                          const std::optional<arch::TransformerSpec>& expected = {},
                                          CheckpointInfo* info = nullptr);
SpireParams<float> load_spire(const std::filesystem::path& path,
                              const std::optional<arch::TransformerSpec>& expected = {},
                              CheckpointInfo* info = nullptr);

std::string spec_to_json(const arch::TransformerSpec& spec);
arch::TransformerSpec spec_from_json(const std::string& text);

}  // namespace specdec_lab::tinymodel
