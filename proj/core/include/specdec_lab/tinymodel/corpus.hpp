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
#include <filesystem>
#include <span>
#include <vector>

#include "specdec_lab/rng.hpp"
#include "specdec_lab/tinymodel/transformer.hpp"

namespace specdec_lab::tinymodel {

enum class Split { Train, Eval };

/// Byte-level corpus (vocab 256). The trailing `eval_fraction` of the file is
/// held out; training batches and evaluation contexts never overlap.
class Corpus {
 public:
  static constexpr double kDefaultEvalFraction = 0.1;

  explicit Corpus(std::vector<std::uint8_t> bytes, double eval_fraction = kDefaultEvalFraction);
  static Corpus load(const std::filesystem::path& path,
                     double eval_fraction = kDefaultEvalFraction);

  std::span<const std::uint8_t> split(Split which) const;

  /// `batch` windows of `length` tokens at uniformly drawn offsets.
  SequenceBatch sample(Split which, std::size_t batch, std::size_t length, Rng& rng) const;

  /// `count` windows at evenly spaced offsets (deterministic).
  std::vector<std::vector<TokenId>> contexts(Split which, std::size_t count,
                                             std::size_t length) const;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t eval_start_;
};

}  // namespace specdec_lab::tinymodel
