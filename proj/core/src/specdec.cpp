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

#include "specdec_lab/specdec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "specdec_lab/errors.hpp"

namespace specdec_lab {

double Rng::next_normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - next_uniform();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
  if (bound == 0) {
    throw InvalidArgument("Rng::next_below: bound must be > 0");
  }
  // Rejection keeps the draw unbiased and portable.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x = engine_();
  while (x >= limit) {
    x = engine_();
  }
  return x % bound;
}

}  // namespace specdec_lab

namespace specdec_lab::specdec {

CategoricalDist::CategoricalDist(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) {
    throw InvalidArgument("distribution must have at least one entry");
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidArgument("distribution entries must be finite and >= 0");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw InvalidArgument("distribution must sum to 1 (got " + std::to_string(sum) + ")");
  }
}

CategoricalDist CategoricalDist::one_hot(std::size_t vocab, TokenId token) {
  if (token < 0 || static_cast<std::size_t>(token) >= vocab) {
    throw InvalidArgument("one_hot: token outside vocabulary");
  }
  std::vector<double> probs(vocab, 0.0);
  probs[static_cast<std::size_t>(token)] = 1.0;
  return CategoricalDist(std::move(probs));
}

CategoricalDist CategoricalDist::uniform(std::size_t vocab) {
  return CategoricalDist(std::vector<double>(vocab, 1.0 / static_cast<double>(vocab)));
}

CategoricalDist CategoricalDist::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double& w : weights) {
    w = std::max(w, 0.0);
    sum += w;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    throw InvalidArgument("normalized: weights have no positive mass");
  }
  for (double& w : weights) {
    w /= sum;
  }
  return CategoricalDist(std::move(weights));
}

TokenId CategoricalDist::sample(double u) const {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (probs_[i] > 0.0) {
      cumulative += probs_[i];
      last_positive = i;
      if (u < cumulative) {
        return static_cast<TokenId>(i);
      }
    }
  }
  // Rounding left the total marginally below u.
  return static_cast<TokenId>(last_positive);
}

namespace {

void require_same_size(const CategoricalDist& p, const CategoricalDist& q) {
  if (p.size() != q.size()) {
    throw InvalidArgument("distributions must share a vocabulary size");
  }
}

}  // namespace

double acceptance_prob(const CategoricalDist& p, const CategoricalDist& q) {
  require_same_size(p, q);
  double alpha = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    alpha += std::min(p[i], q[i]);
  }
  return std::clamp(alpha, 0.0, 1.0);
}

double total_variation(const CategoricalDist& p, const CategoricalDist& q) {
  require_same_size(p, q);
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    tv += std::abs(p[i] - q[i]);
  }
  return 0.5 * tv;
}

CategoricalDist residual(const CategoricalDist& p, const CategoricalDist& q) {
  require_same_size(p, q);
  std::vector<double> excess(p.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    excess[i] = std::max(0.0, p[i] - q[i]);
    mass += excess[i];
  }
  if (!(mass > 0.0)) {
    throw UndefinedResidual("residual is undefined when p == q");
  }
  for (double& e : excess) {
    e /= mass;
  }
  return CategoricalDist(std::move(excess));
}

RoundOutcome verify_round(std::span<const CategoricalDist> p_seq,
                          std::span<const CategoricalDist> q_seq,
                          std::span<const TokenId> draft_tokens, UniformSource& uniforms) {
  const std::size_t depth = draft_tokens.size();
  if (q_seq.size() != depth || p_seq.size() != depth + 1) {
    throw InvalidArgument("verify_round: expected k draft tokens, k draft and k+1 target distributions");
  }
  const std::size_t vocab = p_seq.front().size();
  for (const auto& d : p_seq) {
    if (d.size() != vocab) {
      throw InvalidArgument("verify_round: target distributions differ in vocabulary size");
    }
  }
  for (const auto& d : q_seq) {
    if (d.size() != vocab) {
      throw InvalidArgument("verify_round: draft distributions differ in vocabulary size");
    }
  }
  for (TokenId t : draft_tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw InvalidArgument("verify_round: draft token outside vocabulary");
    }
  }

  RoundOutcome out;
  out.tokens.reserve(depth + 1);
  for (std::size_t i = 0; i < depth; ++i) {
    const auto x = static_cast<std::size_t>(draft_tokens[i]);
    const double p = p_seq[i][x];
    const double q = q_seq[i][x];
    const double u = uniforms.next_uniform();
    // Accept iff u < p / q, written without the division.
    if (q > 0.0 && u * q < p) {
      out.tokens.push_back(draft_tokens[i]);
      ++out.accepted;
      continue;
    }
    const double v = uniforms.next_uniform();
    out.tokens.push_back(residual(p_seq[i], q_seq[i]).sample(v));
    out.emitted = out.accepted + 1;
    return out;
  }
  out.tokens.push_back(p_seq[depth].sample(uniforms.next_uniform()));
  out.emitted = out.accepted + 1;
  return out;
}

RoundOutcome verify_round(std::span<const CategoricalDist> p_seq,
                          std::span<const CategoricalDist> q_seq,
                          std::span<const TokenId> draft_tokens, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return verify_round(p_seq, q_seq, draft_tokens, rng);
}

double tau_analytic(double alpha, std::size_t depth) {
  if (!(alpha >= 0.0 && alpha <= 1.0) || depth < 1) {
    throw InvalidArgument("tau_analytic: requires alpha in [0, 1] and k >= 1");
  }
  if (alpha == 1.0) {
    return static_cast<double>(depth + 1);
  }
  return (1.0 - std::pow(alpha, static_cast<double>(depth + 1))) / (1.0 - alpha);
}

TauEstimate summarize_rounds(std::span<const std::size_t> emitted) {
  if (emitted.size() < 2) {
    throw InvalidArgument("tau estimate needs at least 2 rounds");
  }
  const auto n = static_cast<double>(emitted.size());
  double sum = 0.0;
  for (std::size_t e : emitted) {
    sum += static_cast<double>(e);
  }
  const double mean = sum / n;
  double sq = 0.0;
  for (std::size_t e : emitted) {
    const double d = static_cast<double>(e) - mean;
    sq += d * d;
  }
  const double stddev = std::sqrt(sq / (n - 1.0));
  return TauEstimate{mean, 1.96 * stddev / std::sqrt(n), emitted.size()};
}

TauEstimate tau_monte_carlo(const RoundSource& source, std::size_t n_rounds) {
  if (n_rounds < 2) {
    throw InvalidArgument("tau_monte_carlo: n_rounds must be >= 2");
  }
  std::vector<std::size_t> emitted;
  emitted.reserve(n_rounds);
  for (std::size_t i = 0; i < n_rounds; ++i) {
    emitted.push_back(source().emitted);
  }
  return summarize_rounds(emitted);
}

}  // namespace specdec_lab::specdec
