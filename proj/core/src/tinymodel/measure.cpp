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

#include "specdec_lab/tinymodel/measure.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "specdec_lab/errors.hpp"
#include "specdec_lab/parallel.hpp"
#include "specdec_lab/tinymodel/session.hpp"

namespace specdec_lab::tinymodel {

DraftModel DraftModel::vanilla(const TransformerParams<float>& params) {
  DraftModel d;
  d.kind = arch::DraftKindTag::VanillaSmall;
  d.transformer = &params;
  return d;
}

DraftModel DraftModel::magicdec(const arch::AttentionPolicy& policy) {
  DraftModel d;
  d.kind = arch::DraftKindTag::MagicDec;
  d.magicdec_policy = policy;
  return d;
}

DraftModel DraftModel::feedback(const SpireParams<float>& params) {
  DraftModel d;
  d.kind = arch::DraftKindTag::SPIRe;
  d.spire = &params;
  return d;
}

specdec::CategoricalDist distribution_from_logits(const float* logits, std::size_t vocab) {
  double mx = -INFINITY;
  for (std::size_t i = 0; i < vocab; ++i) mx = std::max(mx, static_cast<double>(logits[i]));
  std::vector<double> p(vocab);
  double sum = 0.0;
  for (std::size_t i = 0; i < vocab; ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) - mx);
    sum += p[i];
  }
  for (auto& x : p) x /= sum;
  return specdec::CategoricalDist::normalized(std::move(p));
}

namespace {

struct ContextResult {
  std::vector<std::size_t> emitted;
  std::size_t draft_forwards = 0;
  std::size_t max_cache = 0;
};

/// Uniform draft interface over a plain decoder and the feedback draft.
class Drafter {
 public:
  Drafter(const DraftModel& model, const TransformerParams<float>* magic_params) {
    if (model.kind == arch::DraftKindTag::SPIRe) {
      spire_ = std::make_unique<SpireSession<float>>(*model.spire);
    } else {
      plain_ = std::make_unique<DecoderSession<float>>(
          model.kind == arch::DraftKindTag::MagicDec ? *magic_params : *model.transformer);
    }
  }

  /// Context positions [0, n); the last one stays pending.
  void prefill(std::span<const TokenId> context, const DecoderSession<float>& target) {
    if (spire_) {
      spire_->absorb_target(target, 0, context.size() - 1);
    } else if (context.size() > 1) {
      plain_->step(context.first(context.size() - 1));
    }
  }

  void begin() {
    if (spire_) spire_->begin_speculation();
    else plain_->begin_speculation();
  }

  /// First draft step of a round; `catch_up` is the previous round's
  /// unprocessed final draft token, if any.
  Matrix<float> first_step(TokenId pending, const std::vector<TokenId>& catch_up) {
    if (spire_) return spire_->step(pending);
    std::vector<TokenId> tokens = catch_up;
    tokens.push_back(pending);
    Matrix<float> logits = plain_->step(tokens);
    return logits.bottomRows(1);
  }

  Matrix<float> next_step(TokenId token) {
    if (spire_) return spire_->step(token);
    const TokenId t[] = {token};
    return plain_->step(t);
  }

  /// Commits c + a positions of context; returns the catch-up tokens.
  std::vector<TokenId> commit(std::size_t committed, std::size_t accepted, std::size_t k,
                              const std::vector<TokenId>& drafts,
                              const DecoderSession<float>& target) {
    if (spire_) {
      spire_->commit(committed, target);
      return {};
    }
    const std::size_t processed = plain_->length();
    plain_->commit(std::min(committed, processed));
    if (accepted == k) return {drafts.back()};
    return {};
  }

  std::size_t forwards() const {
    return spire_ ? spire_->forward_passes() : plain_->forward_passes();
  }
  std::size_t cache() const {
    return spire_ ? spire_->cached_positions() : plain_->cached_positions();
  }

 private:
  std::unique_ptr<DecoderSession<float>> plain_;
  std::unique_ptr<SpireSession<float>> spire_;
};

ContextResult run_context(const TransformerParams<float>& target, const DraftModel& model,
                          const TransformerParams<float>* magic_params,
                          std::span<const TokenId> context, std::size_t generate, std::size_t k,
                          std::uint64_t seed) {
  const std::size_t vocab = target.spec.vocab;
  Rng rng(seed);
  DecoderSession<float> tsess(target, model.kind == arch::DraftKindTag::SPIRe);
  Drafter drafter(model, magic_params);
  if (context.size() > 1) tsess.step(context.first(context.size() - 1));
  drafter.prefill(context, tsess);

  ContextResult out;
  TokenId pending = context.back();
  std::size_t committed = context.size();  // tokens known, pending included
  std::vector<TokenId> catch_up;
  std::size_t produced = 0;
  std::vector<specdec::CategoricalDist> q_seq;
  std::vector<specdec::CategoricalDist> p_seq;
  std::vector<TokenId> drafts;
  while (produced < generate) {
    tsess.begin_speculation();
    drafter.begin();
    q_seq.clear();
    p_seq.clear();
    drafts.clear();
    Matrix<float> logits = drafter.first_step(pending, catch_up);
    for (std::size_t i = 0; i < k; ++i) {
      if (i > 0) logits = drafter.next_step(drafts.back());
      q_seq.push_back(distribution_from_logits(logits.data(), vocab));
      drafts.push_back(q_seq.back().sample(rng.next_uniform()));
    }
    std::vector<TokenId> verify_in{pending};
    verify_in.insert(verify_in.end(), drafts.begin(), drafts.end());
    const Matrix<float> p_logits = tsess.step(verify_in);
    for (Eigen::Index r = 0; r < p_logits.rows(); ++r) {
      p_seq.push_back(distribution_from_logits(p_logits.row(r).data(), vocab));
    }
    const auto outcome = specdec::verify_round(p_seq, q_seq, drafts, rng);
    // Positions c-1 .. c-1+a now hold accepted tokens; the emitted last
    // token becomes the new pending one.
    const std::size_t new_committed = committed + outcome.accepted;
    tsess.commit(new_committed);
    catch_up = drafter.commit(new_committed, outcome.accepted, k, drafts, tsess);
    committed = new_committed + 1;
    pending = outcome.tokens.back();
    produced += outcome.emitted;
    out.emitted.push_back(outcome.emitted);
    out.max_cache = std::max(out.max_cache, drafter.cache());
  }
  out.draft_forwards = drafter.forwards();
  return out;
}

}  // namespace

TauMeasurement measure_tau(const TransformerParams<float>& target, const DraftModel& draft,
                           std::span<const std::vector<TokenId>> contexts, std::size_t generate,
                           std::size_t k, std::uint64_t seed) {
  if (k == 0 || generate == 0) {
    throw InvalidArgument("measure_tau: k and the generation length must be positive");
  }
  if (draft.kind == arch::DraftKindTag::VanillaSmall && draft.transformer == nullptr) {
    throw InvalidArgument("measure_tau: vanilla draft without parameters");
  }
  if (draft.kind == arch::DraftKindTag::SPIRe && draft.spire == nullptr) {
    throw InvalidArgument("measure_tau: feedback draft without parameters");
  }
  const TransformerParams<float>* draft_body =
      draft.kind == arch::DraftKindTag::VanillaSmall ? draft.transformer
      : draft.kind == arch::DraftKindTag::SPIRe      ? &draft.spire->body
                                                     : &target;
  if (draft_body->spec.vocab != target.spec.vocab) {
    throw InvalidArgument("measure_tau: draft and target vocabularies differ");
  }
  TransformerParams<float> magic = target;
  magic.spec.attention = draft.magicdec_policy;
  magic.spec.positions = arch::PositionMode::CacheRelative;

  std::vector<ContextResult> results(contexts.size());
  parallel_for(contexts.size(), [&](std::size_t i) {
    if (contexts[i].empty()) throw InvalidArgument("measure_tau: empty context");
    results[i] = run_context(target, draft, &magic, contexts[i], generate, k, derive_seed(seed, i));
  });

  TauMeasurement m;
  for (const auto& r : results) {
    m.emitted.insert(m.emitted.end(), r.emitted.begin(), r.emitted.end());
    m.draft_forwards += r.draft_forwards;
    m.max_draft_cache = std::max(m.max_draft_cache, r.max_cache);
  }
  m.estimate = specdec::summarize_rounds(m.emitted);
  return m;
}

}  // namespace specdec_lab::tinymodel
