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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specdec_lab/cli/config.hpp"

namespace specdec_lab::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitSchema = 2,
  kExitMissingTau = 3,
  kExitCheckpoint = 4,
  kExitNonpositiveMultiplier = 5,
};

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
};

/// Runs one subcommand. Primary output goes to --out (or `out` when absent),
/// diagnostics to `log`. Returns the process exit code.
int run_command(std::string_view command, const CommandOptions& options, std::ostream& out,
                std::ostream& log);

// Building blocks, exposed for tests. They throw the errors that
// run_command maps to exit codes.

struct SweepRow {
  std::string scenario;
  arch::Count batch = 0;
  arch::Count context = 0;
  double tau = 0.0;
  double delta_t = 0.0;
  double multiplier = 0.0;
  costmodel::Bound bound_draft = costmodel::Bound::MemoryBound;
  costmodel::Bound bound_verify = costmodel::Bound::MemoryBound;
};

std::vector<SweepRow> compute_sweep(const Config& config);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// tau for a scenario at a context length (constant, or looked up in a CSV
/// at the source's fixed L or else at `context`).
double resolve_tau(const SweepScenario& scenario, arch::Count context);

struct ReportLine {
  std::string name;
  double multiplier = 0.0;
  double budget = 0.0;
  double gross = 0.0;
  double train_cost = 0.0;
  double net = 0.0;
};

std::vector<ReportLine> compute_report(const Config& config);
std::string report_csv(const std::vector<ReportLine>& lines);
std::string report_text(const std::vector<ReportLine>& lines);

struct CriticalResult {
  std::vector<std::pair<arch::Count, std::optional<arch::Count>>> rows;
  arch::Count l_crit = 0;
};

CriticalResult compute_critical(const Config& config);
std::string critical_csv(const CriticalResult& result);

struct TauRow {
  std::string scenario;
  std::size_t context = 0;
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t rounds = 0;
};

std::vector<TauRow> compute_tau(const Config& config, std::ostream& log);
std::string tau_csv(const std::vector<TauRow>& rows);

/// Trains the target and every trainable draft; returns written files.
std::vector<std::filesystem::path> run_training(const Config& config,
                                                const std::optional<std::filesystem::path>& out_dir,
                                                std::ostream& log);

/// Applies --seed to the sections that consume a seed.
void apply_seed(Config& config, std::uint64_t seed);

std::string tool_version();

}  // namespace specdec_lab::cli
