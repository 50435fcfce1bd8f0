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
#include <vector>

#include "specdec_lab/errors.hpp"
#include "specdec_lab/specdec.hpp"
#include "support/enumerate.hpp"

namespace specdec_lab::specdec {
namespace {

using testing::ScriptedUniforms;

CategoricalDist random_dist(Rng& rng, std::size_t v, double zero_prob) {
  std::vector<double> w(v);
  for (auto& x : w) x = rng.next_uniform() < zero_prob ? 0.0 : rng.next_uniform();
  w[rng.next_below(v)] += 0.1;
  return CategoricalDist::normalized(std::move(w));
}

TEST(Categorical, ValidationAndSampling) {
  EXPECT_THROW(CategoricalDist({0.5, 0.6}), InvalidArgument);
  EXPECT_THROW(CategoricalDist({-0.1, 1.1}), InvalidArgument);
  EXPECT_THROW(CategoricalDist(std::vector<double>{}), InvalidArgument);
  EXPECT_THROW(CategoricalDist::normalized({0, -1}), InvalidArgument);
  const CategoricalDist d({0.25, 0.0, 0.75});
  EXPECT_EQ(d.sample(0.0), 0);
  EXPECT_EQ(d.sample(0.2499), 0);
  EXPECT_EQ(d.sample(0.25), 2);
  EXPECT_EQ(d.sample(0.9999999), 2);
  EXPECT_EQ(CategoricalDist::one_hot(4, 3).sample(0.1), 3);
}

TEST(Acceptance, Examples) {
  const CategoricalDist p({0.7, 0.3}), q({0.5, 0.5});
  EXPECT_NEAR(acceptance_prob(p, q), 0.8, 1e-15);
  EXPECT_NEAR(total_variation(p, q), 0.2, 1e-15);
  const auto r = residual(p, q);
  EXPECT_DOUBLE_EQ(r[0], 1.0);
  EXPECT_DOUBLE_EQ(r[1], 0.0);
  EXPECT_THROW(residual(p, p), UndefinedResidual);
  EXPECT_DOUBLE_EQ(acceptance_prob(p, p), 1.0);
  EXPECT_DOUBLE_EQ(acceptance_prob(CategoricalDist::one_hot(3, 0), CategoricalDist::one_hot(3, 1)), 0.0);
}

TEST(Acceptance, EqualsOneMinusTotalVariation) {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const std::size_t v = 2 + rng.next_below(15);
    const auto p = random_dist(rng, v, 0.3), q = random_dist(rng, v, 0.3);
    EXPECT_NEAR(acceptance_prob(p, q), 1.0 - total_variation(p, q), 1e-12);
  }
}

TEST(VerifyRound, ScriptedBranches) {
  const CategoricalDist p({0.7, 0.3}), q({0.5, 0.5});
  const std::vector<CategoricalDist> ps{p, p, CategoricalDist({0.1, 0.9})};
  const std::vector<CategoricalDist> qs{q, q};
  // Token 1: accept iff u < 0.6.
  {
    ScriptedUniforms s({0.59, 0.61, 0.0});
    const auto r = verify_round(ps, qs, std::vector<TokenId>{1, 1}, s);
    EXPECT_EQ(r.accepted, 1u);
    EXPECT_EQ(r.emitted, 2u);
    EXPECT_EQ(r.tokens, (std::vector<TokenId>{1, 0}));  // residual is one-hot on 0
    EXPECT_EQ(s.consumed(), 3u);
  }
  {
    ScriptedUniforms s({0.1, 0.1, 0.5});
    const auto r = verify_round(ps, qs, std::vector<TokenId>{0, 1}, s);
    EXPECT_EQ(r.accepted, 2u);
    EXPECT_EQ(r.emitted, 3u);
    EXPECT_EQ(r.tokens, (std::vector<TokenId>{0, 1, 1}));  // bonus from p_3
  }
}

TEST(VerifyRound, ZeroDraftProbabilityRejects) {
  const std::vector<CategoricalDist> ps{CategoricalDist({0.5, 0.5}), CategoricalDist({1.0, 0.0})};
  const std::vector<CategoricalDist> qs{CategoricalDist({1.0, 0.0})};
  ScriptedUniforms s({0.0, 0.0});
  const auto r = verify_round(ps, qs, std::vector<TokenId>{1}, s);
  EXPECT_EQ(r.accepted, 0u);
  EXPECT_EQ(r.tokens.front(), 1);
}

TEST(VerifyRound, ShapeErrors) {
  const auto u = CategoricalDist::uniform(3);
  const std::vector<CategoricalDist> ps{u, u}, qs{u};
  EXPECT_THROW(verify_round(ps, qs, std::vector<TokenId>{0, 1}, 1), InvalidArgument);
  EXPECT_THROW(verify_round(ps, qs, std::vector<TokenId>{3}, 1), InvalidArgument);
  const std::vector<CategoricalDist> bad{CategoricalDist::uniform(2)};
  EXPECT_THROW(verify_round(ps, bad, std::vector<TokenId>{0}, 1), InvalidArgument);
}

TEST(VerifyRound, DeterministicPerSeed) {
  Rng rng(3);
  std::vector<CategoricalDist> ps, qs;
  for (int i = 0; i < 5; ++i) ps.push_back(random_dist(rng, 6, 0.2));
  for (int i = 0; i < 4; ++i) qs.push_back(random_dist(rng, 6, 0.2));
  const std::vector<TokenId> draft{0, 1, 2, 3};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = verify_round(ps, qs, draft, seed);
    const auto b = verify_round(ps, qs, draft, seed);
    EXPECT_EQ(a.tokens, b.tokens);
    EXPECT_EQ(a.emitted, a.tokens.size());
  }
}

TEST(VerifyRound, EnumeratedOutputMatchesTarget) {
  Rng rng(2024);
  for (std::size_t v = 2; v <= 8; ++v) {
    for (int i = 0; i < 12; ++i) {
      const auto p = random_dist(rng, v, 0.3);
      const auto q = i == 0 ? p : random_dist(rng, v, 0.3);
      const auto out = testing::enumerate_first_token(p, q, CategoricalDist::uniform(v));
      double tv = 0;
      for (std::size_t t = 0; t < v; ++t) tv += std::abs(out[t] - p[t]);
      EXPECT_LE(0.5 * tv, 1e-12) << "v=" << v << " i=" << i;
    }
  }
}

TEST(VerifyRound, SampledAcceptanceRateMatches) {
  const CategoricalDist p({0.6, 0.3, 0.1}), q({0.2, 0.2, 0.6});
  const std::vector<CategoricalDist> ps{p, p}, qs{q};
  Rng rng(5);
  std::size_t acc = 0;
  const std::size_t n = 200000;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<TokenId> draft{q.sample(rng.next_uniform())};
    acc += verify_round(ps, qs, draft, rng).accepted;
  }
  EXPECT_NEAR(static_cast<double>(acc) / n, acceptance_prob(p, q), 0.005);
}

TEST(Tau, AnalyticExamples) {
  EXPECT_DOUBLE_EQ(tau_analytic(0.0, 4), 1.0);
  EXPECT_DOUBLE_EQ(tau_analytic(1.0, 4), 5.0);
  EXPECT_NEAR(tau_analytic(0.5, 4), 1.9375, 1e-15);
  EXPECT_NEAR(tau_analytic(0.9, 4), 1 + 0.9 + 0.81 + 0.729 + 0.6561, 1e-12);
  EXPECT_THROW(tau_analytic(1.1, 4), InvalidArgument);
  EXPECT_THROW(tau_analytic(0.5, 0), InvalidArgument);
}

TEST(Tau, SummarizeAndMonteCarlo) {
  const std::vector<std::size_t> e{1, 2, 3, 4, 5};
  const auto s = summarize_rounds(e);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_NEAR(s.half_width_95, 1.96 * std::sqrt(2.5) / std::sqrt(5.0), 1e-15);
  EXPECT_EQ(s.n_rounds, 5u);
  EXPECT_THROW(summarize_rounds(std::vector<std::size_t>{1}), InvalidArgument);
  EXPECT_THROW(tau_monte_carlo([] { return RoundOutcome{}; }, 1), InvalidArgument);

  Rng rng(9);
  const double alpha = 0.7;
  auto source = [&] {
    RoundOutcome r;
    while (r.accepted < 4 && rng.next_uniform() < alpha) ++r.accepted;
    r.emitted = r.accepted + 1;
    return r;
  };
  const auto est = tau_monte_carlo(source, 100000);
  EXPECT_NEAR(est.mean, tau_analytic(alpha, 4), 4 * est.half_width_95);
}

TEST(Rng, PortableStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_uniform(), b.next_uniform());
  Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.next_uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(c.next_below(7), 7u);
  }
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_THROW(c.next_below(0), InvalidArgument);
}

}  // namespace
}  // namespace specdec_lab::specdec
