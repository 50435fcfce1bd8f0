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

#include <benchmark/benchmark.h>

#include <vector>

#include "specdec_lab/arch.hpp"
#include "specdec_lab/costmodel.hpp"
#include "specdec_lab/specdec.hpp"
#include "specdec_lab/tinymodel/session.hpp"

namespace {

using namespace specdec_lab;

void BM_CostSweep(benchmark::State& state) {
  const auto target = arch::default_target_spec();
  const auto drafts = {arch::make_vanilla_draft(target).spec,
                       arch::make_magicdec_draft(target, 64, 1).spec,
                       arch::make_spire_draft(target, 2, 64, 1).spec};
  const costmodel::HardwareSpec hw{7.1e14, 1e12};
  for (auto _ : state) {
    double acc = 0.0;
    for (const auto& d : drafts) {
      for (arch::Count b = 1; b <= 256; b *= 2) {
        for (arch::Count l = 32; l <= 8192; l *= 2) {
          acc += costmodel::delta_t(d, target, hw, {b, l, 4});
        }
      }
    }
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_CostSweep);

void BM_CriticalContext(benchmark::State& state) {
  const auto target = arch::default_target_spec();
  const costmodel::HardwareSpec hw{7.1e14, 1e12};
  for (auto _ : state) benchmark::DoNotOptimize(costmodel::critical_context(target, hw, 4));
}
BENCHMARK(BM_CriticalContext);

void BM_VerifyRound(benchmark::State& state) {
  const auto vocab = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  auto dist = [&] {
    std::vector<double> w(vocab);
    for (auto& x : w) x = rng.next_uniform();
    return specdec::CategoricalDist::normalized(std::move(w));
  };
  std::vector<specdec::CategoricalDist> ps, qs;
  for (int i = 0; i < 5; ++i) ps.push_back(dist());
  for (int i = 0; i < 4; ++i) qs.push_back(dist());
  std::vector<specdec::TokenId> draft;
  for (const auto& q : qs) draft.push_back(q.sample(rng.next_uniform()));
  for (auto _ : state) {
    benchmark::DoNotOptimize(specdec::verify_round(ps, qs, draft, rng));
  }
}
BENCHMARK(BM_VerifyRound)->Arg(256)->Arg(50257);

void BM_DecodeStep(benchmark::State& state) {
  arch::TransformerSpec spec;
  spec.n_layer = 8;
  spec.d_model = 32;
  spec.n_heads = 2;
  spec.n_kv_heads = 2;
  spec.d_head = 16;
  spec.d_ff = 128;
  spec.vocab = 256;
  spec.bytes_per_param = 4;
  if (state.range(1) != 0) {
    spec.attention = arch::AttentionPolicy::streaming(16, 1);
    spec.positions = arch::PositionMode::CacheRelative;
  }
  const auto params = tinymodel::TransformerParams<float>::random(spec, 1);
  const auto context = static_cast<std::size_t>(state.range(0));
  std::vector<tinymodel::TokenId> prefix(context);
  for (std::size_t i = 0; i < context; ++i) prefix[i] = static_cast<tinymodel::TokenId>(i % 256);
  tinymodel::DecoderSession<float> session(params);
  session.step(prefix);
  const tinymodel::TokenId next = 7;
  for (auto _ : state) {
    session.begin_speculation();
    benchmark::DoNotOptimize(session.step(std::span(&next, 1)));
    session.commit(context);
  }
}
BENCHMARK(BM_DecodeStep)->Args({128, 0})->Args({1024, 0})->Args({1024, 1});

}  // namespace
BENCHMARK_MAIN();
