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

#include "specdec_lab/cli/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "specdec_lab/errors.hpp"
#include "specdec_lab/parallel.hpp"
#include "specdec_lab/rng.hpp"
#include "specdec_lab/cli/format.hpp"
#include "specdec_lab/tinymodel/checkpoint.hpp"
#include "specdec_lab/tinymodel/corpus.hpp"
#include "specdec_lab/tinymodel/measure.hpp"

#ifndef SPECDEC_LAB_VERSION
#define SPECDEC_LAB_VERSION "0.0.0"
#endif

namespace specdec_lab::cli {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

void write_manifest(const std::filesystem::path& path, std::string_view command,
                    const std::string& config_text, std::uint64_t seed,
                    const nlohmann::ordered_json& results) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["config_hash"] = "fnv1a64:" + hex64(fnv1a(config_text));
  m["seed"] = seed;
  m["version"] = tool_version();
  m["timestamp"] = utc_timestamp();
  m["results"] = results;
  write_file(path, m.dump(2) + "\n");
}

std::filesystem::path manifest_path(const std::filesystem::path& out) {
  return std::filesystem::path(out.string() + ".manifest.json");
}

std::uint64_t effective_seed(const Config& c) {
  if (c.specdec) return c.specdec->seed;
  if (c.train) return c.train->seed;
  return 0;
}

/// Row multiplier for a named sweep scenario at one grid cell.
SweepRow sweep_cell(const Config& c, const SweepScenario& sc, arch::Count batch,
                    arch::Count context) {
  const auto& hw = require_hardware(c);
  const auto& models = require_models(c);
  const ModelEntry* draft = models.find(sc.draft);
  if (draft == nullptr) throw ConfigError(sc.path + "/draft", "unknown draft " + sc.draft);
  const arch::Count k = c.specdec ? c.specdec->k : 4;
  const costmodel::WorkloadPoint point{batch, context, k};
  SweepRow row;
  row.scenario = sc.name;
  row.batch = batch;
  row.context = context;
  row.tau = resolve_tau(sc, context);
  row.delta_t = costmodel::delta_t(draft->draft.spec, models.target.spec, hw, point);
  row.multiplier = costmodel::throughput_multiplier(row.tau, row.delta_t);
  row.bound_draft = costmodel::decode_cost(draft->draft.spec, hw, point).bound;
  row.bound_verify = costmodel::verify_cost(models.target.spec, hw, point).bound;
  return row;
}

}  // namespace

std::string tool_version() { return SPECDEC_LAB_VERSION; }

void apply_seed(Config& config, std::uint64_t seed) {
  if (config.specdec) config.specdec->seed = seed;
  if (config.train) config.train->seed = seed;
}

double resolve_tau(const SweepScenario& sc, arch::Count context) {
  if (!sc.tau) {
    throw MissingTauSource("scenario \"" + sc.name + "\" (" + sc.path + ") has no tau source");
  }
  if (const double* v = std::get_if<double>(&*sc.tau)) return *v;
  const auto& src = std::get<TauFromCsv>(*sc.tau);
  std::string text;
  try {
    text = read_file(src.path);
  } catch (const std::exception&) {
    throw MissingTauSource("tau table " + src.path.string() + " for scenario \"" + sc.name +
                           "\" cannot be read");
  }
  const CsvTable table = parse_csv(text);
  const int name_col = table.column("scenario");
  const int ctx_col = table.column("L");
  const int tau_col = table.column("tau_mean");
  if (name_col < 0 || ctx_col < 0 || tau_col < 0) {
    throw MissingTauSource("tau table " + src.path.string() + " lacks scenario/L/tau_mean columns");
  }
  const std::string ctx = std::to_string(src.context.value_or(context));
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) continue;
    if (row[static_cast<std::size_t>(name_col)] == src.scenario &&
        row[static_cast<std::size_t>(ctx_col)] == ctx) {
      try {
        const double tau = std::stod(row[static_cast<std::size_t>(tau_col)]);
        if (tau >= 1.0) return tau;
      } catch (const std::exception&) {
      }
      break;
    }
  }
  throw MissingTauSource("tau table " + src.path.string() + " has no usable row for scenario \"" +
                         src.scenario + "\" at L=" + ctx);
}

std::vector<SweepRow> compute_sweep(const Config& c) {
  const auto& sweep = require_sweep(c);
  require_hardware(c);
  require_models(c);
  // Fail before any work.
  for (const auto& sc : sweep.scenarios) {
    for (const auto l : sweep.context_lengths) resolve_tau(sc, l);
  }
  struct Cell {
    const SweepScenario* sc;
    arch::Count batch;
    arch::Count context;
  };
  std::vector<Cell> cells;
  for (const auto& sc : sweep.scenarios) {
    for (const auto b : sweep.batch_sizes) {
      for (const auto l : sweep.context_lengths) cells.push_back({&sc, b, l});
    }
  }
  std::vector<SweepRow> rows(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    rows[i] = sweep_cell(c, *cells[i].sc, cells[i].batch, cells[i].context);
  });
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = csv_row({"scenario", "B", "L", "tau", "delta_t", "multiplier", "bound_draft",
                             "bound_verify"});
  for (const auto& r : rows) {
    out += csv_row({r.scenario, std::to_string(r.batch), std::to_string(r.context),
                    format_double(r.tau), format_double(r.delta_t), format_double(r.multiplier),
                    costmodel::to_string(r.bound_draft), costmodel::to_string(r.bound_verify)});
  }
  return out;
}

std::vector<ReportLine> compute_report(const Config& c) {
  const auto& rep = require_report(c);
  std::vector<ReportLine> lines;
  for (const auto& row : rep.rows) {
    ReportLine line;
    line.name = row.name;
    if (const double* m = std::get_if<double>(&row.multiplier)) {
      line.multiplier = *m;
    } else {
      const auto& cell = std::get<SweepCell>(row.multiplier);
      const auto& sweep = require_sweep(c);
      const SweepScenario* sc = nullptr;
      for (const auto& s : sweep.scenarios) {
        if (s.name == cell.scenario) sc = &s;
      }
      if (sc == nullptr) {
        throw ConfigError("/report/rows", "no sweep scenario named \"" + cell.scenario + "\"");
      }
      line.multiplier = sweep_cell(c, *sc, cell.batch, cell.context).multiplier;
    }
    if (!(line.multiplier > 0.0)) {
      throw NonpositiveMultiplier("report row \"" + row.name + "\" has multiplier " +
                                  format_double(line.multiplier));
    }
    line.budget = rep.budget;
    line.train_cost = row.train_cost;
    line.gross = costmodel::savings(line.multiplier, rep.budget, 0.0);
    line.net = costmodel::savings(line.multiplier, rep.budget, row.train_cost);
    lines.push_back(line);
  }
  return lines;
}

std::string report_csv(const std::vector<ReportLine>& lines) {
  std::string out =
      csv_row({"scenario", "multiplier", "budget", "gross_savings", "train_cost", "net_savings"});
  for (const auto& l : lines) {
    out += csv_row({l.name, format_double(l.multiplier), format_double(l.budget),
                    format_double(l.gross), format_double(l.train_cost), format_double(l.net)});
  }
  return out;
}

std::string report_text(const std::vector<ReportLine>& lines) {
  std::ostringstream ss;
  const auto cell = [&](const std::string& s, int w) { ss << std::setw(w) << s; };
  ss << std::left << std::setw(16) << "scenario" << std::right << std::setw(12) << "multiplier"
     << std::setw(10) << "budget" << std::setw(10) << "gross" << std::setw(12) << "train_cost"
     << std::setw(10) << "net" << '\n';
  for (const auto& l : lines) {
    ss << std::left << std::setw(16) << l.name << std::right;
    cell(format_fixed(l.multiplier, 2), 12);
    cell(format_fixed(l.budget, 2), 10);
    cell(format_fixed(l.gross, 2), 10);
    cell(format_fixed(l.train_cost, 2), 12);
    cell(format_fixed(l.net, 2), 10);
    ss << '\n';
  }
  return ss.str();
}

CriticalResult compute_critical(const Config& c) {
  const auto& hw = require_hardware(c);
  const auto& models = require_models(c);
  const auto& sweep = require_sweep(c);
  const arch::Count k = c.specdec ? c.specdec->k : 4;
  CriticalResult r;
  for (const auto l : sweep.context_lengths) {
    r.rows.emplace_back(l, costmodel::critical_batch_size(models.target.spec, hw, l, k));
  }
  r.l_crit = costmodel::critical_context(models.target.spec, hw, k);
  return r;
}

std::string critical_csv(const CriticalResult& result) {
  std::string out = csv_row({"context_length", "b_crit"});
  for (const auto& [l, b] : result.rows) {
    out += csv_row({std::to_string(l), b ? std::to_string(*b) : std::string("none")});
  }
  return out;
}

std::vector<TauRow> compute_tau(const Config& c, std::ostream& log) {
  const auto& models = require_models(c);
  const auto& sd = require_specdec(c);
  const auto& train = require_train(c);
  if (sd.context_lengths.empty()) {
    throw ConfigError("/specdec/context_lengths", "required by the tau command");
  }
  for (std::size_t i = 0; i < sd.context_lengths.size(); ++i) {
    if (sd.context_lengths[i] + sd.generate + sd.k > train.seq_len) {
      throw ConfigError("/specdec/context_lengths/" + std::to_string(i),
                        "context + generate + k exceeds the trained sequence length");
    }
  }
  const tinymodel::Corpus corpus = tinymodel::Corpus::load(train.corpus, train.eval_fraction);
  const auto target = tinymodel::load_transformer(models.target.checkpoint, models.target.spec);

  std::vector<TauRow> rows;
  for (const auto& entry : models.drafts) {
    tinymodel::TransformerParams<float> vanilla;
    tinymodel::SpireParams<float> spire;
    tinymodel::DraftModel draft;
    switch (entry.draft.kind) {
      case arch::DraftKindTag::VanillaSmall:
        vanilla = tinymodel::load_transformer(entry.checkpoint, entry.draft.spec);
        draft = tinymodel::DraftModel::vanilla(vanilla);
        break;
      case arch::DraftKindTag::MagicDec:
        draft = tinymodel::DraftModel::magicdec(entry.draft.spec.attention);
        break;
      case arch::DraftKindTag::SPIRe:
        spire = tinymodel::load_spire(entry.checkpoint, entry.draft.spec);
        draft = tinymodel::DraftModel::feedback(spire);
        break;
    }
    for (const auto l : sd.context_lengths) {
      const auto contexts = corpus.contexts(tinymodel::Split::Eval, sd.contexts, l);
      const auto m = tinymodel::measure_tau(target, draft, contexts, sd.generate, sd.k,
                                            derive_seed(sd.seed, l));
      rows.push_back({entry.name, l, m.estimate.mean, m.estimate.half_width_95,
                      m.estimate.n_rounds});
      log << "tau " << entry.name << " L=" << l << ": " << format_fixed(m.estimate.mean, 3)
          << " +- " << format_fixed(m.estimate.half_width_95, 3) << '\n';
    }
  }
  return rows;
}

std::string tau_csv(const std::vector<TauRow>& rows) {
  std::string out = csv_row({"scenario", "L", "tau_mean", "ci_half_width", "n_rounds"});
  for (const auto& r : rows) {
    out += csv_row({r.scenario, std::to_string(r.context), format_double(r.mean),
                    format_double(r.half_width), std::to_string(r.rounds)});
  }
  return out;
}

std::vector<std::filesystem::path> run_training(const Config& c,
                                                const std::optional<std::filesystem::path>& out_dir,
                                                std::ostream& log) {
  const auto& models = require_models(c);
  const auto& train = require_train(c);
  const arch::Count k = c.specdec ? c.specdec->k : 4;
  const auto place = [&](const std::filesystem::path& configured) {
    return out_dir ? *out_dir / configured.filename() : configured;
  };
  const tinymodel::Corpus corpus = tinymodel::Corpus::load(train.corpus, train.eval_fraction);
  const auto progress = [&log](const std::string& name, std::size_t total) {
    return [&log, name, total](std::size_t step, double loss) {
      if (step % 100 == 0 || step + 1 == total) {
        log << name << " step " << step + 1 << "/" << total << " loss " << format_fixed(loss, 4)
            << '\n';
      }
    };
  };
  std::vector<std::filesystem::path> written;

  auto target = tinymodel::TransformerParams<float>::random(
      models.target.spec, models.target.init_seed ? models.target.init_seed
                                                  : derive_seed(train.seed, 100));
  const auto tcfg = train.config_for(train.target, k, derive_seed(train.seed, 0));
  const auto trep = tinymodel::train_transformer(target, corpus, tcfg,
                                                 progress("target", tcfg.steps));
  log << "target eval loss " << format_fixed(trep.initial_eval_loss, 4) << " -> "
      << format_fixed(trep.final_eval_loss, 4) << '\n';
  const auto target_path = place(models.target.checkpoint);
  tinymodel::save_checkpoint(target_path, target, {{}, "target", {}, tcfg.seed, tcfg.steps, 0});
  written.push_back(target_path);

  const auto dcfg = train.config_for(train.drafts, k, derive_seed(train.seed, 1));
  for (std::size_t i = 0; i < models.drafts.size(); ++i) {
    const auto& entry = models.drafts[i];
    const auto path = place(entry.checkpoint);
    const tinymodel::CheckpointInfo info{{}, entry.name, {}, dcfg.seed, dcfg.steps, 0};
    tinymodel::TrainReport rep;
    if (entry.draft.kind == arch::DraftKindTag::MagicDec) {
      continue;  // uses the target weights
    }
    if (entry.draft.kind == arch::DraftKindTag::VanillaSmall) {
      auto draft = tinymodel::TransformerParams<float>::random(
          entry.draft.spec, entry.init_seed ? entry.init_seed : derive_seed(train.seed, 200 + i));
      rep = tinymodel::train_draft(draft, target, corpus, dcfg, entry.loss,
                                   progress(entry.name, dcfg.steps));
      tinymodel::save_checkpoint(path, draft, info);
    } else {
      auto draft = tinymodel::SpireParams<float>::from_target(
          target, entry.draft.spec.n_layer, entry.draft.spec.attention);
      rep = tinymodel::train_spire(draft, target, corpus, dcfg, entry.loss,
                                   progress(entry.name, dcfg.steps));
      tinymodel::save_checkpoint(path, draft, info);
    }
    log << entry.name << " eval loss " << format_fixed(rep.initial_eval_loss, 4) << " -> "
        << format_fixed(rep.final_eval_loss, 4) << '\n';
    written.push_back(path);
  }
  return written;
}

int run_command(std::string_view command, const CommandOptions& options, std::ostream& out,
                std::ostream& log) {
  try {
    std::string config_text;
    try {
      config_text = read_file(options.config);
    } catch (const std::exception&) {
      throw ConfigError("", "cannot read config file " + options.config.string());
    }
    Config config =
        parse_config(config_text, std::filesystem::absolute(options.config).parent_path());
    if (options.seed) apply_seed(config, *options.seed);
    const std::uint64_t seed = effective_seed(config);
    const auto emit = [&](const std::string& text, const nlohmann::ordered_json& results) {
      if (options.out) {
        write_file(*options.out, text);
        write_manifest(manifest_path(*options.out), command, config_text, seed, results);
      } else {
        out << text;
      }
    };

    if (command == "sweep") {
      const auto rows = compute_sweep(config);
      emit(sweep_csv(rows), {{"rows", rows.size()}});
    } else if (command == "tau") {
      const auto rows = compute_tau(config, log);
      emit(tau_csv(rows), {{"rows", rows.size()}});
    } else if (command == "report") {
      const auto lines = compute_report(config);
      out << report_text(lines);
      if (options.out) {
        write_file(*options.out, report_csv(lines));
        write_manifest(manifest_path(*options.out), command, config_text, seed,
                       {{"rows", lines.size()}});
      }
    } else if (command == "critical") {
      const auto result = compute_critical(config);
      const std::string csv = critical_csv(result);
      emit(csv, {{"l_crit", result.l_crit}});
      (options.out ? out : log) << "L_crit," << result.l_crit << '\n';
    } else if (command == "train") {
      const auto files = run_training(config, options.out, log);
      nlohmann::ordered_json results = nlohmann::ordered_json::array();
      for (const auto& f : files) {
        results.push_back({{"path", f.string()},
                           {"sha", "fnv1a64:" + hex64(fnv1a(read_file(f)))}});
      }
      const auto dir = options.out ? *options.out : require_train(config).out_dir;
      write_manifest(dir / "train.manifest.json", command, config_text, seed,
                     {{"checkpoints", results}});
      for (const auto& f : files) out << f.string() << '\n';
    } else {
      log << "unknown command: " << command << '\n';
      return kExitSchema;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "config error at " << e.what() << '\n';
    return kExitSchema;
  } catch (const MissingTauSource& e) {
    log << "missing tau source: " << e.what() << '\n';
    return kExitMissingTau;
  } catch (const CheckpointMismatch& e) {
    log << "checkpoint mismatch: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const NonpositiveMultiplier& e) {
    log << "nonpositive multiplier: " << e.what() << '\n';
    return kExitNonpositiveMultiplier;
  } catch (const InvalidArgument& e) {
    log << "invalid input: " << e.what() << '\n';
    return kExitSchema;
  } catch (const TrainingFailure& e) {
    log << e.what() << '\n';
    return kExitInternal;
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace specdec_lab::cli
