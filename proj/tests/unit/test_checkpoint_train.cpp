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
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "specdec_lab/errors.hpp"
#include "specdec_lab/tinymodel/checkpoint.hpp"
#include "specdec_lab/tinymodel/corpus.hpp"
#include "specdec_lab/tinymodel/measure.hpp"
#include "specdec_lab/tinymodel/train.hpp"

namespace specdec_lab::tinymodel {
namespace {

namespace fs = std::filesystem;

arch::TransformerSpec byte_spec(arch::Count layers) {
  arch::TransformerSpec s;
  s.n_layer = layers;
  s.d_model = 16;
  s.n_heads = 2;
  s.n_kv_heads = 1;
  s.d_head = 8;
  s.d_ff = 32;
  s.vocab = 256;
  s.bytes_per_param = 4;
  return s;
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("specdec_lab_" + name + "_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

Corpus small_corpus() {
  std::string text;
  const char* words[] = {"the cat sat. ", "a dog ran home. ", "the bird sang. ", "we ate bread. "};
  Rng rng(1);
  while (text.size() < 40000) text += words[rng.next_below(4)];
  return Corpus(std::vector<std::uint8_t>(text.begin(), text.end()), 0.1);
}

TEST(Checkpoint, TransformerRoundTrip) {
  const auto dir = temp_dir("ckpt");
  const auto p = TransformerParams<float>::random(byte_spec(2), 3);
  CheckpointInfo info;
  info.variant = "target";
  info.spec = p.spec;
  info.seed = 3;
  info.step = 17;
  save_checkpoint(dir / "a.ckpt", p, info);
  CheckpointInfo back;
  const auto q = load_transformer(dir / "a.ckpt", p.spec, &back);
  EXPECT_EQ(back.variant, "target");
  EXPECT_EQ(back.step, 17u);
  EXPECT_EQ(back.kind, CheckpointKind::Transformer);
  const auto a = p.parameters(), b = q.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value(), b[i].value());
  EXPECT_EQ(encode_checkpoint(p, info), encode_checkpoint(q, info));
  fs::remove_all(dir);
}

TEST(Checkpoint, SpireRoundTripAndKindCheck) {
  const auto dir = temp_dir("spire");
  const auto target = TransformerParams<float>::random(byte_spec(3), 4);
  const auto sp = SpireParams<float>::from_target(target, 1, arch::AttentionPolicy::streaming(16, 1));
  CheckpointInfo info;
  info.kind = CheckpointKind::Spire;
  info.spec = sp.body.spec;
  save_checkpoint(dir / "s.ckpt", sp, info);
  const auto back = load_spire(dir / "s.ckpt", sp.body.spec);
  EXPECT_EQ(back.substitution_offset, 2u);
  EXPECT_EQ(back.mix.value(), sp.mix.value());
  EXPECT_EQ(back.body.spec, sp.body.spec);
  EXPECT_THROW(load_transformer(dir / "s.ckpt"), CheckpointMismatch);
  fs::remove_all(dir);
}

TEST(Checkpoint, Mismatches) {
  const auto dir = temp_dir("bad");
  const auto p = TransformerParams<float>::random(byte_spec(1), 5);
  CheckpointInfo info;
  info.spec = p.spec;
  save_checkpoint(dir / "a.ckpt", p, info);
  auto other = p.spec;
  other.d_ff = 64;
  EXPECT_THROW(load_transformer(dir / "a.ckpt", other), CheckpointMismatch);
  // truncated
  const auto bytes = encode_checkpoint(p, info);
  {
    std::ofstream f(dir / "t.ckpt", std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() - 3));
  }
  EXPECT_THROW(load_transformer(dir / "t.ckpt"), CheckpointMismatch);
  {
    std::ofstream f(dir / "g.ckpt", std::ios::binary);
    f << "not a checkpoint";
  }
  EXPECT_THROW(read_checkpoint_info(dir / "g.ckpt"), CheckpointMismatch);
  fs::remove_all(dir);
}

TEST(Checkpoint, SpecJson) {
  auto s = byte_spec(2);
  s.attention = arch::AttentionPolicy::streaming(16, 1);
  s.positions = arch::PositionMode::CacheRelative;
  EXPECT_EQ(spec_from_json(spec_to_json(s)), s);
}

TEST(Corpus, SplitsAreDisjoint) {
  const auto c = small_corpus();
  const auto train = c.split(Split::Train), eval = c.split(Split::Eval);
  EXPECT_EQ(train.data() + train.size(), eval.data());
  EXPECT_NEAR(static_cast<double>(eval.size()) / (train.size() + eval.size()), 0.1, 0.001);
  Rng rng(2);
  const auto b = c.sample(Split::Eval, 3, 50, rng);
  EXPECT_EQ(b.tokens.size(), 150u);
  const auto ctx = c.contexts(Split::Eval, 10, 64);
  EXPECT_EQ(ctx.size(), 10u);
  for (const auto& x : ctx) EXPECT_EQ(x.size(), 64u);
  EXPECT_THROW(c.contexts(Split::Eval, 1, eval.size() + 1), InvalidArgument);
}

TEST(Training, ScheduleShape) {
  TrainConfig cfg;
  cfg.lr = 1.0;
  cfg.warmup_steps = 4;
  cfg.steps = 20;
  EXPECT_DOUBLE_EQ(scheduled_lr(cfg, 0), 0.25);
  EXPECT_DOUBLE_EQ(scheduled_lr(cfg, 3), 1.0);
  EXPECT_NEAR(scheduled_lr(cfg, 19), cfg.min_lr_ratio, 0.02);
  for (std::size_t s = 4; s + 1 < 20; ++s) EXPECT_GE(scheduled_lr(cfg, s), scheduled_lr(cfg, s + 1));
}

TEST(Training, LossDecreasesAndIsDeterministic) {
  const auto c = small_corpus();
  TrainConfig cfg;
  cfg.steps = 40;
  cfg.batch = 2;
  cfg.seq_len = 32;
  cfg.lr = 1e-2;
  cfg.seed = 9;
  auto a = TransformerParams<float>::random(byte_spec(1), 1);
  auto b = a.clone();
  const auto ra = train_transformer(a, c, cfg);
  const auto rb = train_transformer(b, c, cfg);
  EXPECT_LT(ra.final_eval_loss, ra.initial_eval_loss - 0.5);
  EXPECT_EQ(ra.train_losses, rb.train_losses);
  CheckpointInfo info;
  info.spec = a.spec;
  EXPECT_EQ(encode_checkpoint(a, info), encode_checkpoint(b, info));
}

TEST(Training, DraftsLearnFromTarget) {
  const auto c = small_corpus();
  TrainConfig cfg;
  cfg.steps = 30;
  cfg.batch = 2;
  cfg.seq_len = 32;
  cfg.lr = 1e-2;
  auto target = TransformerParams<float>::random(byte_spec(2), 1);
  train_transformer(target, c, cfg);
  auto sp = SpireParams<float>::from_target(target, 1, arch::AttentionPolicy::streaming(8, 1));
  const auto rs = train_spire(sp, target, c, cfg, LossKind::Mixed);
  EXPECT_LT(rs.final_eval_loss, rs.initial_eval_loss);
  auto van = TransformerParams<float>::random(byte_spec(1), 2);
  const auto rv = train_draft(van, target, c, cfg, LossKind::Hard);
  EXPECT_LT(rv.final_eval_loss, rv.initial_eval_loss);
  cfg.seq_len = 30;
  EXPECT_THROW(train_spire(sp, target, c, cfg, LossKind::Mixed), InvalidArgument);
}

TEST(Training, DivergenceIsReported) {
  const auto c = small_corpus();
  TrainConfig cfg;
  cfg.steps = 50;
  cfg.batch = 1;
  cfg.seq_len = 16;
  cfg.lr = 1e30;
  auto p = TransformerParams<float>::random(byte_spec(1), 1);
  EXPECT_THROW(train_transformer(p, c, cfg), TrainingFailure);
  cfg.lr = std::nan("");
  EXPECT_THROW(train_transformer(p, c, cfg), InvalidArgument);
}

TEST(Measure, SelfDraftAcceptsEverything) {
  const auto c = small_corpus();
  const auto target = TransformerParams<float>::random(byte_spec(2), 7);
  const auto ctx = c.contexts(Split::Eval, 6, 24);
  const auto same = measure_tau(target, DraftModel::vanilla(target), ctx, 12, 4, 1);
  EXPECT_DOUBLE_EQ(same.estimate.mean, 5.0);
  EXPECT_EQ(same.estimate.half_width_95, 0.0);
  // A window covering the whole sequence makes the self-draft exact too.
  const auto wide = measure_tau(target, DraftModel::magicdec(arch::AttentionPolicy::streaming(64, 1)),
                                ctx, 12, 4, 1);
  EXPECT_DOUBLE_EQ(wide.estimate.mean, 5.0);
}

TEST(Measure, DeterministicAndBounded) {
  const auto c = small_corpus();
  const auto target = TransformerParams<float>::random(byte_spec(2), 8);
  const auto draft = TransformerParams<float>::random(byte_spec(1), 9);
  const auto ctx = c.contexts(Split::Eval, 5, 20);
  const auto a = measure_tau(target, DraftModel::vanilla(draft), ctx, 10, 4, 3);
  const auto b = measure_tau(target, DraftModel::vanilla(draft), ctx, 10, 4, 3);
  EXPECT_EQ(a.emitted, b.emitted);
  for (auto e : a.emitted) {
    EXPECT_GE(e, 1u);
    EXPECT_LE(e, 5u);
  }
  const auto m = measure_tau(target, DraftModel::magicdec(arch::AttentionPolicy::streaming(4, 1)), ctx,
                             20, 4, 3);
  EXPECT_LE(m.max_draft_cache, 5u);
  const auto sp = SpireParams<float>::from_target(target, 1, arch::AttentionPolicy::streaming(4, 1));
  const auto s = measure_tau(target, DraftModel::feedback(sp), ctx, 20, 4, 3);
  EXPECT_LE(s.max_draft_cache, 5u);
  EXPECT_GE(s.estimate.n_rounds, 5u * 4u);
}

}  // namespace
}  // namespace specdec_lab::tinymodel
