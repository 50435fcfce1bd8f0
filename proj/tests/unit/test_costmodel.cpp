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

#include <gtest/gtest.h>

#include <cmath>

#include "specdec_lab/arch.hpp"
#include "specdec_lab/costmodel.hpp"
#include "specdec_lab/errors.hpp"

namespace specdec_lab::costmodel {
namespace {

using arch::Count;

HardwareSpec hw_with_hoi(double hoi) { return HardwareSpec{hoi * 1e12, 1e12}; }

TEST(ForwardCost, MaxAndTieRule) {
  const auto hw = hw_with_hoi(5);
  auto c = forward_cost(100, 10, 0, hw);
  EXPECT_DOUBLE_EQ(c.total, 100);
  EXPECT_EQ(c.bound, Bound::ComputeBound);
  c = forward_cost(100, 30, 20, hw);
  EXPECT_DOUBLE_EQ(c.total, 250);
  EXPECT_DOUBLE_EQ(c.memory_flop_equiv, 250);
  EXPECT_EQ(c.bound, Bound::MemoryBound);
  c = forward_cost(100, 20, 0, hw);
  EXPECT_EQ(c.bound, Bound::MemoryBound);
}

TEST(DecodeVerify, VerifyIsKPlusOneTimesCompute) {
  const auto spec = arch::default_target_spec();
  const auto hw = hw_with_hoi(710);
  for (Count b : {1u, 7u, 64u}) {
    const WorkloadPoint p{b, 512, 4};
    const auto d = decode_cost(spec, hw, p);
    const auto v = verify_cost(spec, hw, p);
    EXPECT_DOUBLE_EQ(v.compute, 5 * d.compute);
    EXPECT_DOUBLE_EQ(v.memory_bytes, d.memory_bytes);
    EXPECT_DOUBLE_EQ(d.compute, static_cast<double>(b) * arch::decode_flops_per_token(spec, 512));
    EXPECT_DOUBLE_EQ(d.memory_bytes,
                     static_cast<double>(arch::weight_bytes(spec) + arch::kv_bytes(spec, 512, b)));
  }
}

TEST(DecodeVerify, SmallBatchHugeWeightsIsMemoryBound) {
  auto spec = arch::default_target_spec();
  spec.n_layer = 80;
  EXPECT_EQ(decode_cost(spec, hw_with_hoi(300), {1, 16, 4}).bound, Bound::MemoryBound);
}

TEST(DeltaT, MemoryBoundQuarterDraftIsTwo) {
  // kv negligible: weights dominate, draft has 1/4 of the body.
  arch::TransformerSpec t = arch::default_target_spec();
  const auto d = arch::prune_spec(t, 2);
  const double dt = delta_t(d, t, hw_with_hoi(710), {1, 1, 4});
  EXPECT_NEAR(dt, 2.0, 1e-3);
}

TEST(DeltaT, SelfDraftDepthOne) {
  const auto t = arch::default_target_spec();
  EXPECT_DOUBLE_EQ(delta_t(t, t, hw_with_hoi(710), {1, 128, 1}), 2.0);
}

TEST(DeltaT, AblationDenseQuarterDraftConstantInL) {
  const auto t = arch::default_target_spec();
  const auto d = arch::prune_spec(t, 2);
  for (int e = 6; e <= 20; ++e) {
    EXPECT_EQ(delta_t(d, t, hw_with_hoi(710), {1, Count{1} << e, 4}), 2.0) << "L=2^" << e;
  }
}

TEST(DeltaT, ScaleInvarianceWhenBoundsAgree) {
  const auto t = arch::default_target_spec();
  const auto d = arch::make_spire_draft(t, 2, 64, 1).spec;
  const HardwareSpec a{7.1e14, 1e12};
  const HardwareSpec b{7.1e14 * 3.5, 1e12 * 3.5};
  for (Count batch : {1u, 16u, 256u}) {
    for (Count l : {64u, 512u, 4096u}) {
      const WorkloadPoint p{batch, l, 4};
      EXPECT_NEAR(delta_t(d, t, a, p), delta_t(d, t, b, p), 1e-12);
    }
  }
}

TEST(Multiplier, Basics) {
  EXPECT_DOUBLE_EQ(throughput_multiplier(3.0, 1.5), 2.0);
  EXPECT_DOUBLE_EQ(throughput_multiplier(1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(throughput_multiplier(2.5, 1.0), 2.5);
  EXPECT_GT(throughput_multiplier(2.0, 1.9), 1.0);
  EXPECT_LT(throughput_multiplier(2.0, 2.1), 1.0);
  EXPECT_THROW(throughput_multiplier(0.5, 1.0), InvalidArgument);
  EXPECT_THROW(throughput_multiplier(2.0, 0.0), InvalidArgument);
}

TEST(Savings, Examples) {
  EXPECT_NEAR(savings(2.78, 10, 0.25), 10 * (1 - 1 / 2.78) - 0.25, 1e-12);
  EXPECT_EQ(std::round(savings(2.78, 10, 0.25) * 100) / 100, 6.15);
  EXPECT_EQ(std::round(savings(2.05, 10, 0) * 100) / 100, 5.12);
  EXPECT_DOUBLE_EQ(savings(1.0, 10, 0), 0.0);
  EXPECT_DOUBLE_EQ(savings(3.0, 0, 0.25), -0.25);
  EXPECT_LT(savings(2.0, 10, 0), savings(2.5, 10, 0));
  EXPECT_GT(savings(2.0, 10, 0), savings(2.0, 10, 1));
  EXPECT_THROW(savings(0, 10, 0), InvalidArgument);
  EXPECT_THROW(savings(2, -1, 0), InvalidArgument);
  EXPECT_THROW(savings(2, 10, -1), InvalidArgument);
}

// Smallest compute-bound batch by direct scan.
std::optional<Count> scan_b_crit(const arch::TransformerSpec& s, const HardwareSpec& hw, Count l,
                                 Count k, Count limit) {
  for (Count b = 1; b <= limit; ++b) {
    if (verify_cost(s, hw, {b, l, k}).bound == Bound::ComputeBound) return b;
  }
  return std::nullopt;
}

TEST(CriticalBatch, AgreesWithBruteForceScan) {
  const auto s = arch::default_target_spec();
  for (double hoi : {150.0, 710.0}) {
    const auto hw = hw_with_hoi(hoi);
    for (Count l : {1u, 4u, 16u, 32u, 33u, 40u, 64u, 200u, 1024u}) {
      const auto closed = critical_batch_size(s, hw, l, 4);
      const auto scanned = scan_b_crit(s, hw, l, 4, Count{1} << 20);
      if (closed && *closed <= (Count{1} << 20)) {
        EXPECT_EQ(closed, scanned) << "hoi " << hoi << " L " << l;
      } else if (!closed) {
        EXPECT_FALSE(scanned.has_value()) << "hoi " << hoi << " L " << l;
      }
      // existence condition
      const double per_seq_compute = 5.0 * static_cast<double>(arch::decode_flops_per_token(s, l));
      const double per_seq_mem = static_cast<double>(arch::kv_bytes(s, l, 1)) * hoi;
      EXPECT_EQ(closed.has_value(), per_seq_compute > per_seq_mem);
    }
  }
}

TEST(CriticalBatch, EdgeCases) {
  auto s = arch::default_target_spec();
  EXPECT_FALSE(critical_batch_size(s, hw_with_hoi(710), 1 << 20, 4).has_value());
  // No KV and tiny weights: compute dominates immediately.
  arch::TransformerSpec t = s;
  t.n_layer = 1;
  t.bytes_per_param = 1;
  const HardwareSpec weak{1e9, 1e12};  // hoi 1e-3
  EXPECT_EQ(critical_batch_size(t, weak, 1, 4), Count{1});
  auto streaming = s;
  streaming.attention = arch::AttentionPolicy::streaming(64, 1);
  EXPECT_THROW(critical_batch_size(streaming, hw_with_hoi(710), 64, 4), InvalidArgument);
}

TEST(CriticalContext, CalibratedTargetAndMonotoneInHoi) {
  const auto s = arch::default_target_spec();
  EXPECT_EQ(critical_context(s, hw_with_hoi(710), 4), 32u);
  Count prev = critical_context(s, hw_with_hoi(50), 4);
  for (double hoi = 100; hoi <= 3200; hoi *= 2) {
    const Count cur = critical_context(s, hw_with_hoi(hoi), 4);
    EXPECT_LE(cur, prev) << hoi;
    prev = cur;
  }
  // L_crit is the last context with a B_crit.
  const Count lc = critical_context(s, hw_with_hoi(710), 4);
  EXPECT_TRUE(critical_batch_size(s, hw_with_hoi(710), lc, 4).has_value());
  EXPECT_FALSE(critical_batch_size(s, hw_with_hoi(710), lc + 1, 4).has_value());
}

TEST(Monotonicity, MagicDecUpVanillaDownInBatch) {
  const auto t = arch::default_target_spec();
  const auto magic = arch::make_magicdec_draft(t, 64, 1).spec;
  const auto vanilla = arch::make_vanilla_draft(t).spec;
  const auto hw = hw_with_hoi(710);
  for (Count l : {128u, 512u, 2048u, 8192u}) {
    double prev_m = 0, prev_v = 1e300;
    for (Count b = 1; b <= 1024; b *= 2) {
      const double m = throughput_multiplier(3.0, delta_t(magic, t, hw, {b, l, 4}));
      const double v = throughput_multiplier(3.0, delta_t(vanilla, t, hw, {b, l, 4}));
      EXPECT_GE(m, prev_m);
      EXPECT_LE(v, prev_v);
      prev_m = m;
      prev_v = v;
    }
  }
}

TEST(Validation, HardwareAndPoint) {
  EXPECT_THROW((HardwareSpec{0, 1}.validate()), InvalidArgument);
  EXPECT_THROW((HardwareSpec{1, -1}.validate()), InvalidArgument);
  EXPECT_THROW((WorkloadPoint{0, 1, 1}.validate()), InvalidArgument);
  EXPECT_THROW((WorkloadPoint{1, 1, 0}.validate()), InvalidArgument);
  EXPECT_DOUBLE_EQ((HardwareSpec{7.1e14, 1e12}.hoi()), 710.0);
}

}  // namespace
}  // namespace specdec_lab::costmodel
