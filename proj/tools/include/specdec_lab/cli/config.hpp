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
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "specdec_lab/arch.hpp"
#include "specdec_lab/costmodel.hpp"
#include "specdec_lab/tinymodel/train.hpp"

namespace specdec_lab::cli {

/// Schema violation at a JSON pointer such as "/sweep/batch_sizes/2".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error((path.empty() ? std::string("/") : path) + ": " + message),
        path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// A scenario has no usable tau value.
class MissingTauSource : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A report row's multiplier is not positive.
class NonpositiveMultiplier : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelEntry {
  std::string name;
  arch::DraftKind draft;
  tinymodel::LossKind loss = tinymodel::LossKind::Mixed;
  std::filesystem::path checkpoint;
  std::uint64_t init_seed = 0;
};

struct TargetEntry {
  arch::TransformerSpec spec;
  std::filesystem::path checkpoint;
  std::uint64_t init_seed = 0;
};

struct ModelsSection {
  TargetEntry target;
  std::vector<ModelEntry> drafts;  // config order

  const ModelEntry* find(const std::string& name) const;
};

struct SpecdecSection {
  arch::Count k = 4;
  std::size_t generate = 64;
  std::size_t contexts = 512;
  std::vector<std::size_t> context_lengths;
  std::uint64_t seed = 0;
};

struct Schedule {
  std::size_t steps = 0;
  double lr = 3e-3;
  std::size_t warmup = 0;
  double min_lr_ratio = 0.1;
};

struct TrainSection {
  std::filesystem::path corpus;
  std::filesystem::path out_dir;
  std::size_t seq_len = 256;
  std::size_t batch = 4;
  double eval_fraction = 0.1;
  double omega = tinymodel::kDefaultOmega;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
  Schedule target;
  Schedule drafts;

  /// Library config for one model; k comes from the specdec section.
  tinymodel::TrainConfig config_for(const Schedule& schedule, arch::Count k,
                                    std::uint64_t seed) const;
};

struct TauFromCsv {
  std::filesystem::path path;
  std::string scenario;
  std::optional<std::size_t> context;  // absent: look up each cell's L
};

struct SweepScenario {
  std::string name;
  std::string draft;
  std::optional<std::variant<double, TauFromCsv>> tau;
  std::string path;  // JSON pointer, for error messages
};

struct SweepSection {
  std::vector<arch::Count> batch_sizes;
  std::vector<arch::Count> context_lengths;
  std::vector<SweepScenario> scenarios;
};

struct SweepCell {
  std::string scenario;
  arch::Count batch = 0;
  arch::Count context = 0;
};

struct ReportRow {
  std::string name;
  std::variant<double, SweepCell> multiplier;
  double train_cost = 0.0;
};

struct ReportSection {
  double budget = 0.0;
  std::vector<ReportRow> rows;
};

struct Config {
  std::filesystem::path base_dir;
  std::optional<costmodel::HardwareSpec> hardware;
  std::optional<ModelsSection> models;
  std::optional<SpecdecSection> specdec;
  std::optional<TrainSection> train;
  std::optional<SweepSection> sweep;
  std::optional<ReportSection> report;
};

/// Parses and validates a config document. Relative paths resolve against
/// `base_dir`. Throws ConfigError.
Config parse_config(const std::string& text, const std::filesystem::path& base_dir);
Config load_config(const std::filesystem::path& path);

/// Section accessors that throw ConfigError("/<name>") when absent.
const costmodel::HardwareSpec& require_hardware(const Config& c);
const ModelsSection& require_models(const Config& c);
const SpecdecSection& require_specdec(const Config& c);
const TrainSection& require_train(const Config& c);
const SweepSection& require_sweep(const Config& c);
const ReportSection& require_report(const Config& c);

}  // namespace specdec_lab::cli
