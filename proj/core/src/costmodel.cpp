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

#include "specdec_lab/costmodel.hpp"

#include <algorithm>
#include <cmath>

#include "specdec_lab/errors.hpp"

namespace specdec_lab::costmodel {

double HardwareSpec::hoi() const { return peak_flops / mem_bandwidth; }

void HardwareSpec::validate() const {
  if (!(peak_flops > 0.0) || !(mem_bandwidth > 0.0) || !std::isfinite(peak_flops) ||
      !std::isfinite(mem_bandwidth)) {
    throw InvalidArgument("hardware: peak_flops and mem_bandwidth must be finite and > 0");
  }
}

void WorkloadPoint::validate() const {
  if (batch < 1 || context < 1 || depth < 1) {
    throw InvalidArgument("workload: batch, context and depth must be >= 1");
  }
}

const char* to_string(Bound bound) {
  return bound == Bound::ComputeBound ? "compute" : "memory";
}

CostBreakdown forward_cost(double compute, double weight_bytes, double kv_bytes,
                           const HardwareSpec& hw) {
  if (compute < 0.0 || weight_bytes < 0.0 || kv_bytes < 0.0) {
    throw InvalidArgument("forward_cost: inputs must be >= 0");
  }
  CostBreakdown out;
  out.compute = compute;
  out.memory_bytes = weight_bytes + kv_bytes;
  out.memory_flop_equiv = out.memory_bytes * hw.hoi();
  if (compute > out.memory_flop_equiv) {
    out.total = compute;
    out.bound = Bound::ComputeBound;
  } else {
    out.total = out.memory_flop_equiv;
    out.bound = Bound::MemoryBound;
  }
  return out;
}

namespace {

CostBreakdown pass_cost(const arch::TransformerSpec& spec, const HardwareSpec& hw,
                        const WorkloadPoint& point, arch::Count tokens_per_sequence) {
  point.validate();
  const double per_token = static_cast<double>(arch::decode_flops_per_token(spec, point.context));
  const double compute =
      static_cast<double>(point.batch) * static_cast<double>(tokens_per_sequence) * per_token;
  return forward_cost(compute, static_cast<double>(arch::weight_bytes(spec)),
                      static_cast<double>(arch::kv_bytes(spec, point.context, point.batch)), hw);
}

void require_dense_verifier(const arch::TransformerSpec& spec) {
  if (spec.attention.is_streaming()) {
    throw InvalidArgument("verification always uses dense target attention");
  }
}

}  // namespace

CostBreakdown decode_cost(const arch::TransformerSpec& spec, const HardwareSpec& hw,
                          const WorkloadPoint& point) {
  return pass_cost(spec, hw, point, 1);
}

CostBreakdown verify_cost(const arch::TransformerSpec& spec, const HardwareSpec& hw,
                          const WorkloadPoint& point) {
  return pass_cost(spec, hw, point, point.depth + 1);
}

double delta_t(const arch::TransformerSpec& draft, const arch::TransformerSpec& target,
               const HardwareSpec& hw, const WorkloadPoint& point) {
  const double t_draft = decode_cost(draft, hw, point).total;
  const double t_verify = verify_cost(target, hw, point).total;
  const double t_target = decode_cost(target, hw, point).total;
  return (static_cast<double>(point.depth) * t_draft + t_verify) / t_target;
}

double throughput_multiplier(double tau, double dt) {
  if (!(tau >= 1.0) || !(dt > 0.0)) {
    throw InvalidArgument("throughput_multiplier: requires tau >= 1 and dt > 0");
  }
  return tau / dt;
}

std::optional<arch::Count> critical_batch_size(const arch::TransformerSpec& spec,
                                               const HardwareSpec& hw, arch::Count context,
                                               arch::Count depth) {
  require_dense_verifier(spec);
  const auto is_compute_bound = [&](arch::Count batch) {
    return verify_cost(spec, hw, {batch, context, depth}).bound == Bound::ComputeBound;
  };

  // Verification is compute-bound iff B * (c - kv * hoi) > N * hoi, where c is
  // the per-sequence verify compute and kv the per-sequence KV bytes.
  const long double per_seq_compute =
      static_cast<long double>(depth + 1) *
      static_cast<long double>(arch::decode_flops_per_token(spec, context));
  const long double per_seq_memory =
      static_cast<long double>(arch::kv_bytes(spec, context, 1)) * hw.hoi();
  const long double slope = per_seq_compute - per_seq_memory;
  if (!(slope > 0)) {
    return std::nullopt;
  }
  const long double weights = static_cast<long double>(arch::weight_bytes(spec)) * hw.hoi();
  const long double estimate = std::floor(weights / slope) + 1;
  if (estimate > static_cast<long double>(arch::Count{1} << 62)) {
    return std::nullopt;
  }
  arch::Count batch = std::max<arch::Count>(1, static_cast<arch::Count>(estimate));

  // Settle rounding against the exact classification used everywhere else.
  while (batch > 1 && is_compute_bound(batch - 1)) {
    --batch;
  }
  while (!is_compute_bound(batch)) {
    ++batch;
  }
  return batch;
}

arch::Count critical_context(const arch::TransformerSpec& spec, const HardwareSpec& hw,
                             arch::Count depth) {
  const auto has_batch = [&](arch::Count context) {
    return critical_batch_size(spec, hw, context, depth).has_value();
  };
  if (!has_batch(1)) {
    return 0;
  }
  arch::Count lo = 1;
  arch::Count hi = 2;
  while (hi <= kCriticalContextCap && has_batch(hi)) {
    lo = hi;
    hi *= 2;
  }
  if (hi > kCriticalContextCap) {
    return kCriticalContextCap;
  }
  // Invariant: has_batch(lo) && !has_batch(hi).
  while (hi - lo > 1) {
    const arch::Count mid = lo + (hi - lo) / 2;
    if (has_batch(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double savings(double multiplier, double decode_budget, double train_cost) {
  if (!(multiplier > 0.0) || decode_budget < 0.0 || train_cost < 0.0) {
    throw InvalidArgument("savings: requires multiplier > 0, budget >= 0, train_cost >= 0");
  }
  return decode_budget * (1.0 - 1.0 / multiplier) - train_cost;
}

}  // namespace specdec_lab::costmodel
