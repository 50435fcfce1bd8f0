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
#include <random>

namespace specdec_lab {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(mix_seed(seed) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

/// Source of uniform variates in [0, 1).
class UniformSource {
 public:
  virtual ~UniformSource() = default;
  virtual double next_uniform() = 0;
};

/// mt19937_64 with a portable 53-bit mantissa mapping, so draws are identical
/// across standard libraries (std::uniform_real_distribution is not).
class Rng final : public UniformSource {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double next_uniform() override {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on two portable uniforms.
  double next_normal();

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

}  // namespace specdec_lab
