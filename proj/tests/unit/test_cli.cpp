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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "specdec_lab/cli/commands.hpp"
#include "specdec_lab/cli/config.hpp"
#include "specdec_lab/cli/format.hpp"
#include "specdec_lab/tinymodel/checkpoint.hpp"

namespace specdec_lab::cli {
namespace {

namespace fs = std::filesystem;

const fs::path kConfigs = fs::path(SPECDEC_LAB_SOURCE_DIR) / "configs";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("specdec_lab_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int run(const std::string& cmd, const fs::path& config, std::optional<fs::path> out = {}) {
    out_.str("");
    log_.str("");
    CommandOptions o;
    o.config = config;
    o.out = std::move(out);
    return run_command(cmd, o, out_, log_);
  }

  static std::string read(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::ostringstream out_, log_;
};

const char* kSmallSweep = R"({
  "hardware": {"peak_flops": 7.1e14, "mem_bandwidth": 1e12},
  "models": {
    "target": {"n_layer": 8, "d_model": 768, "n_heads": 12, "n_kv_heads": 12, "d_head": 64,
               "d_ff": 3072, "vocab": 50257, "bytes_per_param": 2},
    "drafts": {"quarter": {"kind": "vanilla", "layers": 2}}
  },
  "specdec": {"k": 2},
  "sweep": {"batch_sizes": [1], "context_lengths": [64],
            "scenarios": [{"name": "q", "draft": "quarter", "tau": 3.0}]}
})";

TEST_F(CliTest, SingleCellMultiplierIsTauOverDeltaT) {
  ASSERT_EQ(run("sweep", write("c.json", kSmallSweep), dir_ / "s.csv"), kExitOk) << log_.str();
  const auto table = parse_csv(read(dir_ / "s.csv"));
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_EQ(table.rows[0][table.column("delta_t")], "1.5");
  EXPECT_EQ(table.rows[0][table.column("multiplier")], "2");
  EXPECT_TRUE(fs::exists(dir_ / "s.csv.manifest.json"));
  const auto manifest = read(dir_ / "s.csv.manifest.json");
  EXPECT_NE(manifest.find("\"config_hash\": \"fnv1a64:"), std::string::npos);
  EXPECT_NE(manifest.find("\"command\": \"sweep\""), std::string::npos);
}

TEST_F(CliTest, SweepIsByteIdenticalAndConsistent) {
  const auto cfg = kConfigs / "calibrated.json";
  ASSERT_EQ(run("sweep", cfg, dir_ / "a.csv"), kExitOk) << log_.str();
  ASSERT_EQ(run("sweep", cfg, dir_ / "b.csv"), kExitOk);
  const auto a = read(dir_ / "a.csv");
  EXPECT_EQ(a, read(dir_ / "b.csv"));
  EXPECT_EQ(a.find('\r'), std::string::npos);
  const auto t = parse_csv(a);
  EXPECT_EQ(t.rows.size(), 3u * 9u * 9u);
  for (const auto& r : t.rows) {
    const double tau = std::stod(r[t.column("tau")]);
    const double dt = std::stod(r[t.column("delta_t")]);
    EXPECT_NEAR(std::stod(r[t.column("multiplier")]), tau / dt, 1e-12 * tau / dt);
  }
}

TEST_F(CliTest, ReportArithmetic) {
  ASSERT_EQ(run("report", kConfigs / "cost_analysis.json", dir_ / "r.csv"), kExitOk) << log_.str();
  const auto text = out_.str();
  EXPECT_NE(text.find("6.15"), std::string::npos) << text;
  EXPECT_NE(text.find("5.12"), std::string::npos) << text;
  const auto lines = compute_report(load_config(kConfigs / "cost_analysis.json"));
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_NEAR(lines[0].net, 10 * (1 - 1 / 2.78) - 0.25, 1e-12);
  EXPECT_NEAR(lines[1].gross, 10 * (1 - 1 / 2.05), 1e-12);
}

TEST_F(CliTest, CriticalContext) {
  ASSERT_EQ(run("critical", kConfigs / "calibrated.json", dir_ / "c.csv"), kExitOk) << log_.str();
  EXPECT_EQ(out_.str(), "L_crit,32\n");
}

TEST_F(CliTest, SchemaViolationsNameTheField) {
  std::string text = kSmallSweep;
  auto bad = text;
  bad.replace(bad.find("\"mem_bandwidth\""), 0, "\"mem_bandwith\": 1, ");
  EXPECT_EQ(run("sweep", write("a.json", bad)), kExitSchema);
  EXPECT_NE(log_.str().find("/hardware/mem_bandwith: unknown key"), std::string::npos) << log_.str();

  bad = text;
  bad.replace(bad.find("\"k\": 2"), 6, "\"k\": \"2\"");
  EXPECT_EQ(run("sweep", write("k.json", bad)), kExitSchema);
  EXPECT_NE(log_.str().find("/specdec/k"), std::string::npos) << log_.str();

  bad = text;
  bad.replace(bad.find("[1]"), 3, "[1, -2]");
  EXPECT_EQ(run("sweep", write("b.json", bad)), kExitSchema);
  EXPECT_NE(log_.str().find("/sweep/batch_sizes/1"), std::string::npos) << log_.str();

  bad = text;
  bad.replace(bad.find("\"draft\": \"quarter\""), 18, "\"draft\": \"nothing\"");
  EXPECT_EQ(run("sweep", write("c.json", bad)), kExitSchema);
  EXPECT_NE(log_.str().find("/sweep/scenarios/0"), std::string::npos) << log_.str();

  EXPECT_EQ(run("sweep", write("d.json", "{ not json")), kExitSchema);
  EXPECT_EQ(run("report", write("e.json", kSmallSweep)), kExitSchema);  // no report section
}

TEST_F(CliTest, MissingTauSource) {
  std::string text = kSmallSweep;
  text.replace(text.find(", \"tau\": 3.0"), 12, "");
  EXPECT_EQ(run("sweep", write("a.json", text)), kExitMissingTau);
  text = kSmallSweep;
  write("t.csv", "scenario,L,tau_mean\nq,128,2.5\n");
  text.replace(text.find("3.0"), 3, R"({"csv": "t.csv"})");
  EXPECT_EQ(run("sweep", write("b.json", text)), kExitMissingTau) << log_.str();
  write("t.csv", "scenario,L,tau_mean\nq,64,2.5\n");
  EXPECT_EQ(run("sweep", dir_ / "b.json", dir_ / "o.csv"), kExitOk) << log_.str();
  EXPECT_NE(read(dir_ / "o.csv").find(",2.5,"), std::string::npos);
}

TEST_F(CliTest, NonpositiveMultiplier) {
  const auto cfg = write("r.json", R"({"report": {"budget": 10, "rows": [{"name": "x", "multiplier": 0}]}})");
  EXPECT_EQ(run("report", cfg), kExitNonpositiveMultiplier);
}

TEST_F(CliTest, CheckpointSpecMismatch) {
  const std::string cfg = R"({
    "models": {
      "target": {"n_layer": 2, "d_model": 16, "n_heads": 2, "n_kv_heads": 1, "d_head": 8,
                 "d_ff": 32, "vocab": 256, "bytes_per_param": 4},
      "drafts": {"magicdec": {"kind": "magicdec", "window": 8, "sink": 1}}
    },
    "specdec": {"k": 4, "generate": 4, "contexts": 2, "context_lengths": [8]},
    "train": {"corpus": "corpus.txt", "seq_len": 32, "batch": 1,
              "target": {"steps": 1, "lr": 0.001}, "drafts": {"steps": 1, "lr": 0.001}}
  })";
  write("corpus.txt", std::string(4000, 'a'));
  const auto path = write("c.json", cfg);
  fs::create_directories(dir_ / "checkpoints");
  auto spec = load_config(path).models->target.spec;
  spec.d_ff = 64;
  tinymodel::CheckpointInfo info;
  info.spec = spec;
  tinymodel::save_checkpoint(dir_ / "checkpoints" / "target.ckpt",
                             tinymodel::TransformerParams<float>::random(spec, 1), info);
  EXPECT_EQ(run("tau", path), kExitCheckpoint) << log_.str();
}

TEST_F(CliTest, TrainThenTauRoundTrip) {
  const std::string cfg = R"({
    "models": {
      "target": {"n_layer": 2, "d_model": 16, "n_heads": 2, "n_kv_heads": 1, "d_head": 8,
                 "d_ff": 32, "vocab": 256, "bytes_per_param": 4},
      "drafts": {
        "small": {"kind": "vanilla", "layers": 1},
        "magicdec": {"kind": "magicdec", "window": 8, "sink": 1},
        "fb": {"kind": "spire", "layers": 1, "window": 8, "sink": 1}
      }
    },
    "specdec": {"k": 4, "generate": 8, "contexts": 4, "context_lengths": [8, 16], "seed": 3},
    "train": {"corpus": "corpus.txt", "seq_len": 32, "batch": 1, "seed": 5,
              "target": {"steps": 3, "lr": 0.001}, "drafts": {"steps": 2, "lr": 0.001}}
  })";
  std::string corpus;
  for (int i = 0; i < 400; ++i) corpus += "the quick brown fox. ";
  write("corpus.txt", corpus);
  const auto path = write("c.json", cfg);
  ASSERT_EQ(run("train", path), kExitOk) << log_.str();
  for (const char* f : {"target.ckpt", "small.ckpt", "fb.ckpt", "train.manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "checkpoints" / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir_ / "checkpoints" / "magicdec.ckpt"));
  ASSERT_EQ(run("tau", path, dir_ / "t1.csv"), kExitOk) << log_.str();
  ASSERT_EQ(run("tau", path, dir_ / "t2.csv"), kExitOk);
  const auto t1 = read(dir_ / "t1.csv");
  EXPECT_EQ(t1, read(dir_ / "t2.csv"));
  const auto table = parse_csv(t1);
  EXPECT_EQ(table.rows.size(), 3u * 2u);
  EXPECT_GE(table.column("tau_mean"), 0);
}

TEST(Format, DoublesAndCsv) {
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(csv_row({"a", "b,c"}), "a,\"b,c\"\n");
  const auto t = parse_csv("x,y\n1,\"2,3\"\n");
  EXPECT_EQ(t.rows[0][1], "2,3");
  EXPECT_EQ(t.column("y"), 1);
  EXPECT_EQ(t.column("z"), -1);
  EXPECT_EQ(hex64(fnv1a("")), "cbf29ce484222325");
}

}  // namespace
}  // namespace specdec_lab::cli
