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
#include <functional>
#include <span>
#include <vector>

#include "specdec_lab/rng.hpp"

namespace specdec_lab::specdec {

using TokenId = std::int32_t;

/// Probability vector over a vocabulary; entries >= 0 summing to 1 within 1e-9.
class CategoricalDist {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit CategoricalDist(std::vector<double> probs);

  /// Deterministic point mass.
  static CategoricalDist one_hot(std::size_t vocab, TokenId token);
  static CategoricalDist uniform(std::size_t vocab);
  /// Clamps negatives to zero and rescales; throws if nothing is left.
  static CategoricalDist normalized(std::vector<double> weights);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

  /// Inverse-CDF sample in index order given u in [0, 1).
  TokenId sample(double u) const;

 private:
  std::vector<double> probs_;
};

struct RoundOutcome {
  std::size_t accepted = 0;
  std::size_t emitted = 0;
  std::vector<TokenId> tokens;  // accepted drafts, then the residual or bonus token
};

struct TauEstimate {
  double mean = 0.0;
  double half_width_95 = 0.0;
  std::size_t n_rounds = 0;

  double lower() const { return mean - half_width_95; }
  double upper() const { return mean + half_width_95; }
};

/// Expected acceptance probability: sum_i min(p_i, q_i).
double acceptance_prob(const CategoricalDist& p, const CategoricalDist& q);

double total_variation(const CategoricalDist& p, const CategoricalDist& q);

/// normalize(max(0, p - q)). Throws UndefinedResidual when p == q.
CategoricalDist residual(const CategoricalDist& p, const CategoricalDist& q);

/// One round of token verification. Position i accepts draft token x with
/// probability min(1, p_i(x) / q_i(x)) using one uniform per position; the
/// first rejection emits a residual sample, full acceptance emits a bonus
/// token from p_{k+1}. q_i(x) = 0 is a certain rejection.
RoundOutcome verify_round(std::span<const CategoricalDist> p_seq,
                          std::span<const CategoricalDist> q_seq,
                          std::span<const TokenId> draft_tokens, UniformSource& uniforms);

RoundOutcome verify_round(std::span<const CategoricalDist> p_seq,
                          std::span<const CategoricalDist> q_seq,
                          std::span<const TokenId> draft_tokens, std::uint64_t rng_seed);

/// E[tokens per round] when each of k positions is accepted independently
/// with probability alpha.
double tau_analytic(double alpha, std::size_t depth);

/// Mean with a normal-approximation 95% half-width (1.96 * s / sqrt(n)).
TauEstimate summarize_rounds(std::span<const std::size_t> emitted);

using RoundSource = std::function<RoundOutcome()>;

/// Pulls n_rounds outcomes from `source` and summarizes their emitted counts.
TauEstimate tau_monte_carlo(const RoundSource& source, std::size_t n_rounds);

}  // namespace specdec_lab::specdec
