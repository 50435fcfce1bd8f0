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

// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// nonzero if any selected criterion fails.
//
//   acceptance [--only N] [--desk-dir DIR] [--reuse-checkpoints]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specdec_lab/arch.hpp"
#include "specdec_lab/cli/commands.hpp"
#include "specdec_lab/cli/config.hpp"
#include "specdec_lab/costmodel.hpp"
#include "specdec_lab/parallel.hpp"
#include "specdec_lab/specdec.hpp"
#include "specdec_lab/tinymodel/feedback.hpp"
#include "specdec_lab/tinymodel/loss.hpp"
#include "specdec_lab/tinymodel/measure.hpp"
#include "specdec_lab/tinymodel/session.hpp"
#include "support/enumerate.hpp"
#include "support/gradcheck.hpp"
#include "support/micro.hpp"
#include "support/reference.hpp"

namespace fs = std::filesystem;
using namespace specdec_lab;

namespace {

const fs::path kSourceDir = SPECDEC_LAB_SOURCE_DIR;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

specdec::CategoricalDist random_dist(Rng& rng, std::size_t v, double zero_prob) {
  std::vector<double> w(v);
  for (auto& x : w) x = rng.next_uniform() < zero_prob ? 0.0 : rng.next_uniform();
  w[rng.next_below(v)] += 0.05;
  return specdec::CategoricalDist::normalized(std::move(w));
}

Verdict verification_exactness() {
  Rng rng(1);
  std::size_t pairs = 0;
  double worst = 0.0;
  for (std::size_t v = 2; v <= 8; ++v) {
    for (int i = 0; i < 32; ++i) {
      specdec::CategoricalDist p = random_dist(rng, v, 0.25);
      specdec::CategoricalDist q = random_dist(rng, v, 0.25);
      if (i == 0) q = p;
      if (i == 1) {  // disjoint supports
        std::vector<double> a(v, 0.0), b(v, 0.0);
        a[0] = 1.0;
        b[v - 1] = 1.0;
        p = specdec::CategoricalDist(a);
        q = specdec::CategoricalDist(b);
      }
      const auto bonus = random_dist(rng, v, 0.0);
      const auto out = testing::enumerate_first_token(p, q, bonus);
      double tv = 0.0;
      for (std::size_t t = 0; t < v; ++t) tv += std::abs(out[t] - p[t]);
      worst = std::max(worst, 0.5 * tv);
      ++pairs;
    }
  }
  return {pairs >= 200 && worst <= 1e-12,
          std::to_string(pairs) + " pairs, max TV " + fmt("%.3g", worst)};
}

Verdict tau_consistency() {
  const std::size_t k = 4, n = 100000, reps = 100;
  std::vector<std::string> parts;
  bool ok = true;
  for (double alpha : {0.1, 0.5, 0.9}) {
    // Draft always proposes token 0; the target gives it probability alpha,
    // so every position is accepted independently with probability alpha.
    const specdec::CategoricalDist p({alpha, 1.0 - alpha});
    const specdec::CategoricalDist q({1.0, 0.0});
    const std::vector<specdec::CategoricalDist> ps(k + 1, p), qs(k, q);
    const std::vector<specdec::TokenId> draft(k, 0);
    const double expected = specdec::tau_analytic(alpha, k);
    std::vector<int> covered(reps, 0);
    parallel_for(reps, [&](std::size_t r) {
      Rng rng(derive_seed(0x7a0, r) ^ static_cast<std::uint64_t>(alpha * 1000));
      const auto est = specdec::tau_monte_carlo(
          [&] { return specdec::verify_round(ps, qs, draft, rng); }, n);
      covered[r] = est.lower() <= expected && expected <= est.upper();
    });
    int hits = 0;
    for (int c : covered) hits += c;
    ok = ok && hits >= 93;
    parts.push_back("alpha " + fmt("%.1f", alpha) + ": " + std::to_string(hits) + "/100");
  }
  std::string detail;
  for (const auto& s : parts) detail += (detail.empty() ? "" : ", ") + s;
  return {ok, detail};
}

Verdict cost_arithmetic() {
  const double a = costmodel::savings(2.78, 10, 0.25);
  const double b = costmodel::savings(2.05, 10, 0);
  const bool ok = std::round(a * 100) == 615 && std::round(b * 100) == 512;
  return {ok, "savings " + fmt("%.4f", a) + " and " + fmt("%.4f", b)};
}

Verdict ablation_constancy() {
  const auto target = arch::default_target_spec();
  const auto draft = arch::prune_spec(target, target.n_layer / 4);
  const costmodel::HardwareSpec hw{7.1e14, 1e12};
  bool ok = arch::body_params(draft) * 4 == arch::body_params(target);
  double worst = 0.0;
  for (int e = 6; e <= 20; ++e) {
    const arch::Count l = arch::Count{1} << e;
    const costmodel::WorkloadPoint pt{1, l, 4};
    ok = ok && arch::kv_bytes(draft, l, 1) * 4 == arch::kv_bytes(target, l, 1);
    ok = ok && costmodel::decode_cost(draft, hw, pt).bound == costmodel::Bound::MemoryBound;
    ok = ok && costmodel::verify_cost(target, hw, pt).bound == costmodel::Bound::MemoryBound;
    const double dt = costmodel::delta_t(draft, target, hw, pt);
    worst = std::max(worst, std::abs(dt - 2.0));
    ok = ok && dt == 2.0;
  }
  return {ok, "max |delta_t - 2| over L=2^6..2^20: " + fmt("%.3g", worst)};
}

Verdict calibrated_ratios() {
  const auto config = cli::load_config(kSourceDir / "configs" / "calibrated.json");
  const auto rows = cli::compute_sweep(config);
  std::map<std::string, double> m;
  for (const auto& r : rows) {
    if (r.batch == 64 && r.context == 512) m[r.scenario] = r.multiplier;
  }
  const double sv = m.at("spire") / m.at("vanilla");
  const double sm = m.at("spire") / m.at("magicdec");
  const bool ok = sv >= 1.8 && sv <= 2.2 && sm >= 1.25 && sm <= 1.45;
  return {ok, "at (64, 512): spire " + fmt("%.3f", m.at("spire")) + ", magicdec " +
                  fmt("%.3f", m.at("magicdec")) + ", vanilla " + fmt("%.3f", m.at("vanilla")) +
                  "; spire/vanilla " + fmt("%.3f", sv) + ", spire/magicdec " + fmt("%.3f", sm)};
}

Verdict monotonicity() {
  const auto target = arch::default_target_spec();
  const auto magic = arch::make_magicdec_draft(target, 64, 1).spec;
  const auto vanilla = arch::make_vanilla_draft(target).spec;
  const costmodel::HardwareSpec hw{7.1e14, 1e12};
  const arch::Count batches[] = {1, 4, 16, 64, 256, 1024};
  const arch::Count lengths[] = {128, 512, 2048, 8192, 32768, 131072};
  std::size_t violations = 0;
  for (const auto l : lengths) {
    double prev_m = 0.0, prev_v = INFINITY;
    for (const auto b : batches) {
      const costmodel::WorkloadPoint pt{b, l, 4};
      const double mm = costmodel::throughput_multiplier(3.0, costmodel::delta_t(magic, target, hw, pt));
      const double mv = costmodel::throughput_multiplier(3.0, costmodel::delta_t(vanilla, target, hw, pt));
      violations += (mm < prev_m) + (mv > prev_v);
      prev_m = mm;
      prev_v = mv;
    }
  }
  return {violations == 0, "6x6 grid, " + std::to_string(violations) + " violations"};
}

Verdict gradient_check() {
  using namespace tinymodel;
  const auto spec = testing::micro_spec(2);
  const auto draft = testing::micro_params<double>(spec, 101);
  const auto teacher = testing::micro_params<double>(spec, 202);
  const std::size_t len = 8;
  const SequenceBatch batch{testing::random_tokens(len, spec.vocab, 303), 1, len};
  Matrix<double> probs;
  {
    Graph<double> g(false);
    probs = row_softmax<double>(forward_target(g, teacher, batch).logits.value());
  }
  const auto r = testing::gradcheck(draft.parameters(), draft.parameter_names(), [&](Graph<double>& g) {
    return mixed_loss(g, forward_target(g, draft, batch).logits, probs, 0.5);
  });
  return {r.max_relative_error <= 1e-4,
          std::to_string(r.checked) + " entries, max relative error " +
              fmt("%.3g", r.max_relative_error) + " at " + r.worst};
}

Verdict feedback_equivalence() {
  using namespace tinymodel;
  const auto target = testing::micro_params<double>(testing::micro_spec(3), 11);
  double worst = 0.0;
  for (const auto& policy : {arch::AttentionPolicy::dense(), arch::AttentionPolicy::streaming(3, 1)}) {
    auto sp = SpireParams<double>::from_target(target, 2, policy);
    testing::randomize_mix(sp, 12);
    const std::size_t k = 4, len = 16;
    const auto tokens = testing::random_tokens(len, 11, 13);
    Graph<double> g(false);
    const auto trace = forward_target(g, target, SequenceBatch{tokens, 1, len}).trace;
    const auto logits = spire_train_forward<double>(g, sp, SequenceBatch{tokens, 1, len}, trace, k).value();
    std::vector<std::vector<std::vector<double>>> tt(len);
    for (std::size_t t = 0; t < len; ++t) {
      for (const auto& layer : trace) {
        const auto row = layer.value().row(static_cast<Eigen::Index>(t));
        tt[t].emplace_back(row.data(), row.data() + row.size());
      }
    }
    const auto ref = testing::reference_spire(sp, tokens, tt, [k](std::size_t s, std::size_t t) {
      return s / k == t / k;
    });
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t v = 0; v < 11; ++v) {
        worst = std::max(worst, std::abs(logits(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v)) - ref[t][v]));
      }
    }
  }
  return {worst <= 1e-10, "max |logit diff| " + fmt("%.3g", worst)};
}

struct Pooled {
  double mean = 0, half = 0;
  std::size_t n = 0;
};

// Combines per-L estimates (mean, 1.96 s / sqrt(n), n) into one over all rounds.
Pooled pool(const std::vector<cli::TauRow>& rows, const std::string& scenario) {
  double sum = 0, sumsq = 0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.scenario != scenario) continue;
    const double ni = static_cast<double>(r.rounds);
    const double s = r.half_width * std::sqrt(ni) / 1.96;
    sum += ni * r.mean;
    sumsq += (ni - 1) * s * s + ni * r.mean * r.mean;
    n += r.rounds;
  }
  Pooled p;
  p.n = n;
  p.mean = sum / static_cast<double>(n);
  const double var = (sumsq - static_cast<double>(n) * p.mean * p.mean) / static_cast<double>(n - 1);
  p.half = 1.96 * std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
  return p;
}

Verdict desk_training(const fs::path& dir, bool reuse) {
  auto config = cli::load_config(kSourceDir / "configs" / "desk.json");
  fs::create_directories(dir);
  auto& models = *config.models;
  models.target.checkpoint = dir / models.target.checkpoint.filename();
  for (auto& d : models.drafts) d.checkpoint = dir / d.checkpoint.filename();
  const bool have = fs::exists(models.target.checkpoint) && fs::exists(dir / "spire.ckpt");
  if (!(reuse && have)) {
    std::ostringstream log;
    cli::run_training(config, dir, log);
    std::cerr << log.str();
  }
  std::ostringstream log;
  const auto rows = cli::compute_tau(config, log);
  std::cerr << log.str();
  const auto spire = pool(rows, "spire"), hard = pool(rows, "spire_hard");
  const auto magic = pool(rows, "magicdec"), vanilla = pool(rows, "vanilla");
  auto show = [](const char* name, const Pooled& p) {
    return std::string(name) + " " + fmt("%.3f", p.mean) + "+-" + fmt("%.3f", p.half) + " (" +
           std::to_string(p.n) + " rounds)";
  };
  const bool a = spire.mean - spire.half > hard.mean + hard.half;
  const bool b = magic.mean - magic.half > vanilla.mean + vanilla.half;
  const bool enough = std::min({spire.n, hard.n, magic.n, vanilla.n}) >= 2000;
  return {a && b && enough, show("spire", spire) + " vs " + show("spire_hard", hard) + "; " +
                                show("magicdec", magic) + " vs " + show("vanilla", vanilla)};
}

Verdict streaming_bound() {
  using namespace tinymodel;
  const std::size_t window = 64, sink = 1, tokens = 10000;
  arch::TransformerSpec spec;
  spec.n_layer = 2;
  spec.d_model = 16;
  spec.n_heads = 2;
  spec.n_kv_heads = 1;
  spec.d_head = 8;
  spec.d_ff = 32;
  spec.vocab = 256;
  spec.bytes_per_param = 4;
  const auto target = TransformerParams<float>::random(spec, 5);
  const auto policy = arch::AttentionPolicy::streaming(window, sink);
  const auto sp = SpireParams<float>::from_target(target, 1, policy);

  // Direct decoding, one token per step.
  auto magic_spec = arch::make_magicdec_draft(spec, window, sink).spec;
  auto magic_params = target.clone();
  magic_params.spec = magic_spec;
  DecoderSession<float> dec(magic_params);
  SpireSession<float> fb(sp);
  std::size_t worst = 0;
  Rng rng(1);
  for (std::size_t i = 0; i < tokens; ++i) {
    const TokenId t = static_cast<TokenId>(rng.next_below(256));
    dec.step(std::span(&t, 1));
    fb.step(t);
    worst = std::max({worst, dec.cached_positions(), fb.cached_positions()});
  }
  // Speculative generation through the measurement loop.
  const std::vector<std::vector<TokenId>> ctx{{1, 2, 3, 4, 5, 6, 7, 8}};
  const auto m1 = measure_tau(target, DraftModel::magicdec(policy), ctx, tokens, 4, 2);
  const auto m2 = measure_tau(target, DraftModel::feedback(sp), ctx, tokens, 4, 2);
  worst = std::max({worst, m1.max_draft_cache, m2.max_draft_cache});
  return {worst <= window + sink,
          "max cached positions " + std::to_string(worst) + " over " + std::to_string(tokens) +
              " tokens (bound " + std::to_string(window + sink) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"specdec-lab acceptance checks"};
  int only = 0;
  std::string desk_dir = (fs::current_path() / "desk_checkpoints").string();
  bool reuse = false;
  app.add_option("--only", only, "Run a single criterion (1-10)");
  app.add_option("--desk-dir", desk_dir, "Checkpoint directory for the desk-scale run");
  app.add_flag("--reuse-checkpoints", reuse, "Skip training when desk checkpoints exist");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"verification exactness", verification_exactness},
      {"tau consistency", tau_consistency},
      {"cost-analysis arithmetic", cost_arithmetic},
      {"ablation constancy", ablation_constancy},
      {"calibrated ratio reproduction", calibrated_ratios},
      {"monotonicity", monotonicity},
      {"gradient check", gradient_check},
      {"feedback-pass equivalence", feedback_equivalence},
      {"desk-scale training", [&] { return desk_training(desk_dir, reuse); }},
      {"streaming KV bound", streaming_bound},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": "
              << v.detail << " (" << fmt("%.1f", secs) << " s)" << std::endl;
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
