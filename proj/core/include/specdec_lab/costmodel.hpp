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
#include <optional>

#include "specdec_lab/arch.hpp"

namespace specdec_lab::costmodel {

struct HardwareSpec {
  double peak_flops = 0.0;     // FLOP/s
  double mem_bandwidth = 0.0;  // byte/s

  /// Hardware operational intensity in FLOP per byte.
  double hoi() const;
  void validate() const;
};

struct WorkloadPoint {
  arch::Count batch = 1;
  arch::Count context = 1;
  arch::Count depth = 1;  // maximum speculation depth k

  void validate() const;
};

enum class Bound { ComputeBound, MemoryBound };

const char* to_string(Bound bound);

/// Forward cost in FLOP-equivalents with compute and memory traffic fully
/// overlapped: total = max(compute, memory_bytes * hoi).
struct CostBreakdown {
  double compute = 0.0;
  double memory_bytes = 0.0;
  double memory_flop_equiv = 0.0;
  double total = 0.0;
  Bound bound = Bound::MemoryBound;
};

/// Ties classify as MemoryBound.
CostBreakdown forward_cost(double compute, double weight_bytes, double kv_bytes,
                           const HardwareSpec& hw);

/// One autoregressive step for a batch: weights read once, compute and KV
/// traffic scale with the batch.
CostBreakdown decode_cost(const arch::TransformerSpec& spec, const HardwareSpec& hw,
                          const WorkloadPoint& point);

/// Verification of k draft tokens plus the bonus position in one pass.
CostBreakdown verify_cost(const arch::TransformerSpec& spec, const HardwareSpec& hw,
                          const WorkloadPoint& point);

/// Iteration time multiplier (k * t_draft + t_verify) / t_target.
double delta_t(const arch::TransformerSpec& draft, const arch::TransformerSpec& target,
               const HardwareSpec& hw, const WorkloadPoint& point);

double throughput_multiplier(double tau, double dt);

/// Smallest batch at which verification is compute-bound, or nullopt when
/// KV traffic alone keeps it memory-bound for every batch size.
std::optional<arch::Count> critical_batch_size(const arch::TransformerSpec& spec,
                                               const HardwareSpec& hw, arch::Count context,
                                               arch::Count depth);

/// Upper end of the L_crit search; returned when every probed L still has a B_crit.
inline constexpr arch::Count kCriticalContextCap = arch::Count{1} << 40;

/// Largest context with a critical batch size (0 if none).
arch::Count critical_context(const arch::TransformerSpec& spec, const HardwareSpec& hw,
                             arch::Count depth);

/// Decode budget saved by a speedup, net of the draft's training cost.
double savings(double multiplier, double decode_budget, double train_cost);

}  // namespace specdec_lab::costmodel
