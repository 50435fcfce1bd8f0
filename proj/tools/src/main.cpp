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

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "specdec_lab/cli/commands.hpp"

int main(int argc, char** argv) {
  using specdec_lab::cli::CommandOptions;
  CLI::App app{"Throughput model and desk-scale draft training for speculative decoding"};
  app.set_version_flag("--version", specdec_lab::cli::tool_version());
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  const char* commands[][2] = {
      {"sweep", "Throughput multipliers over a batch x context grid (CSV)"},
      {"tau", "Measure average generation length of trained drafts (CSV)"},
      {"report", "Decode-cost savings per scenario"},
      {"train", "Train the target and draft checkpoints"},
      {"critical", "Critical batch sizes and the critical context length (CSV)"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON config file")->required();
    sub->add_option("--out", out, "Output path (stdout when omitted)");
    sub->add_option("--seed", seed, "Override the config seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : specdec_lab::cli::kExitSchema;
  }

  CommandOptions options;
  options.config = config;
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--out") > 0) options.out = out;
    if (sub->count("--seed") > 0) options.seed = seed;
    return specdec_lab::cli::run_command(sub->get_name(), options, std::cout, std::cerr);
  }
  return specdec_lab::cli::kExitInternal;
}
