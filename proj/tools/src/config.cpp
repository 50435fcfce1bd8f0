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

#include "specdec_lab/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "specdec_lab/errors.hpp"

namespace specdec_lab::cli {
namespace {

using Json = nlohmann::ordered_json;

/// Object view that records which keys were read; finish() rejects the rest.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& message) const { throw ConfigError(path_, message); }
  std::string at(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& get(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(at(key), "required field is missing");
    return j_.at(key);
  }
  const Json* find(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(at(item.key()), "unknown key");
    }
  }

  const std::string& path() const { return path_; }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::uint64_t as_uint(const Json& j, const std::string& path, std::uint64_t min = 0) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
    throw ConfigError(path, "expected a nonnegative integer");
  }
  const auto v = j.get<std::uint64_t>();
  if (v < min) throw ConfigError(path, "must be at least " + std::to_string(min));
  return v;
}

double as_double(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const auto v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

double as_positive(const Json& j, const std::string& path) {
  const double v = as_double(j, path);
  if (!(v > 0.0)) throw ConfigError(path, "must be positive");
  return v;
}

double as_nonnegative(const Json& j, const std::string& path) {
  const double v = as_double(j, path);
  if (v < 0.0) throw ConfigError(path, "must be nonnegative");
  return v;
}

std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

std::vector<std::uint64_t> as_uint_list(const Json& j, const std::string& path,
                                        std::uint64_t min) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_uint(j[i], path + "/" + std::to_string(i), min));
  }
  return out;
}

template <typename T>
void opt_uint(Reader& r, const std::string& key, T& field, std::uint64_t min = 0) {
  if (const Json* v = r.find(key)) field = static_cast<T>(as_uint(*v, r.at(key), min));
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

/// Wraps library validation failures with the field path of the object.
template <typename F>
void checked(const std::string& path, F&& f) {
  try {
    f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, e.what());
  }
}

arch::AttentionPolicy parse_attention(const Json& j, const std::string& path) {
  Reader r(j, path);
  const std::string kind = as_string(r.get("kind"), r.at("kind"));
  arch::AttentionPolicy out;
  if (kind == "dense") {
    // nothing else
  } else if (kind == "streaming") {
    const auto window = as_uint(r.get("window"), r.at("window"), 1);
    const auto sink = as_uint(r.get("sink"), r.at("sink"));
    out = arch::AttentionPolicy::streaming(window, sink);
  } else {
    throw ConfigError(r.at("kind"), "expected \"dense\" or \"streaming\"");
  }
  r.finish();
  return out;
}

arch::PositionMode parse_positions(const Json& j, const std::string& path) {
  const std::string s = as_string(j, path);
  if (s == "text_absolute") return arch::PositionMode::TextAbsolute;
  if (s == "cache_relative") return arch::PositionMode::CacheRelative;
  throw ConfigError(path, "expected \"text_absolute\" or \"cache_relative\"");
}

/// Spec fields read from `r`; other keys are left for the caller.
arch::TransformerSpec read_spec_fields(Reader& r) {
  arch::TransformerSpec s;
  s.n_layer = as_uint(r.get("n_layer"), r.at("n_layer"));
  s.d_model = as_uint(r.get("d_model"), r.at("d_model"), 1);
  s.n_heads = as_uint(r.get("n_heads"), r.at("n_heads"), 1);
  s.n_kv_heads = s.n_heads;
  opt_uint(r, "n_kv_heads", s.n_kv_heads, 1);
  s.d_head = s.d_model / s.n_heads;
  opt_uint(r, "d_head", s.d_head, 1);
  s.d_ff = as_uint(r.get("d_ff"), r.at("d_ff"), 1);
  s.vocab = as_uint(r.get("vocab"), r.at("vocab"), 1);
  opt_uint(r, "bytes_per_param", s.bytes_per_param, 1);
  if (const Json* a = r.find("attention")) s.attention = parse_attention(*a, r.at("attention"));
  if (const Json* p = r.find("positions")) s.positions = parse_positions(*p, r.at("positions"));
  return s;
}

arch::TransformerSpec parse_spec(const Json& j, const std::string& path, bool allow_empty) {
  Reader r(j, path);
  auto s = read_spec_fields(r);
  r.finish();
  checked(path, [&] { s.validate(allow_empty); });
  return s;
}

costmodel::HardwareSpec parse_hardware(const Json& j) {
  Reader r(j, "/hardware");
  costmodel::HardwareSpec hw;
  hw.peak_flops = as_positive(r.get("peak_flops"), r.at("peak_flops"));
  hw.mem_bandwidth = as_positive(r.get("mem_bandwidth"), r.at("mem_bandwidth"));
  r.finish();
  return hw;
}

ModelsSection parse_models(const Json& j, const std::filesystem::path& base,
                           const std::filesystem::path& default_dir) {
  Reader r(j, "/models");
  ModelsSection out;
  {
    Reader t(r.get("target"), r.at("target"));
    out.target.spec = read_spec_fields(t);
    out.target.checkpoint = default_dir / "target.ckpt";
    if (const Json* c = t.find("checkpoint")) {
      out.target.checkpoint = resolve(base, as_string(*c, t.at("checkpoint")));
    }
    opt_uint(t, "init_seed", out.target.init_seed);
    t.finish();
    checked(t.path(), [&] { out.target.spec.validate(false); });
  }
  const Json& drafts = r.get("drafts");
  if (!drafts.is_object()) throw ConfigError(r.at("drafts"), "expected an object");
  for (const auto& item : drafts.items()) {
    const std::string path = r.at("drafts") + "/" + item.key();
    if (item.key() == "target") throw ConfigError(path, "draft name \"target\" is reserved");
    Reader d(item.value(), path);
    ModelEntry e;
    e.name = item.key();
    const std::string kind = as_string(d.get("kind"), d.at("kind"));
    const auto& target = out.target.spec;
    checked(path, [&] {
      if (kind == "vanilla" || kind == "vanilla_small") {
        if (const Json* spec = d.find("spec")) {
          e.draft = {arch::DraftKindTag::VanillaSmall, parse_spec(*spec, d.at("spec"), false)};
        } else {
          arch::Count layers = 0;
          opt_uint(d, "layers", layers, 1);
          e.draft = arch::make_vanilla_draft(target, layers);
        }
      } else if (kind == "magicdec") {
        e.draft = arch::make_magicdec_draft(target, as_uint(d.get("window"), d.at("window"), 1),
                                            as_uint(d.get("sink"), d.at("sink")));
      } else if (kind == "spire") {
        e.draft = arch::make_spire_draft(target, as_uint(d.get("layers"), d.at("layers"), 1),
                                         as_uint(d.get("window"), d.at("window"), 1),
                                         as_uint(d.get("sink"), d.at("sink")));
      } else {
        throw ConfigError(d.at("kind"), "expected \"vanilla\", \"magicdec\" or \"spire\"");
      }
      arch::validate_draft(e.draft, target);
    });
    if (const Json* loss = d.find("loss")) {
      const std::string s = as_string(*loss, d.at("loss"));
      if (s == "mixed") e.loss = tinymodel::LossKind::Mixed;
      else if (s == "hard") e.loss = tinymodel::LossKind::Hard;
      else throw ConfigError(d.at("loss"), "expected \"mixed\" or \"hard\"");
    }
    e.checkpoint = default_dir / (e.name + ".ckpt");
    if (const Json* c = d.find("checkpoint")) {
      e.checkpoint = resolve(base, as_string(*c, d.at("checkpoint")));
    }
    opt_uint(d, "init_seed", e.init_seed);
    d.finish();
    out.drafts.push_back(std::move(e));
  }
  r.finish();
  return out;
}

SpecdecSection parse_specdec(const Json& j) {
  Reader r(j, "/specdec");
  SpecdecSection s;
  s.k = as_uint(r.get("k"), r.at("k"), 1);
  opt_uint(r, "generate", s.generate, 1);
  opt_uint(r, "contexts", s.contexts, 2);
  if (const Json* l = r.find("context_lengths")) {
    for (auto v : as_uint_list(*l, r.at("context_lengths"), 1)) s.context_lengths.push_back(v);
  }
  opt_uint(r, "seed", s.seed);
  r.finish();
  return s;
}

Schedule parse_schedule(const Json& j, const std::string& path) {
  Reader r(j, path);
  Schedule s;
  s.steps = as_uint(r.get("steps"), r.at("steps"));
  if (const Json* v = r.find("lr")) s.lr = as_positive(*v, r.at("lr"));
  opt_uint(r, "warmup", s.warmup);
  if (const Json* v = r.find("min_lr_ratio")) {
    s.min_lr_ratio = as_nonnegative(*v, r.at("min_lr_ratio"));
    if (s.min_lr_ratio > 1.0) throw ConfigError(r.at("min_lr_ratio"), "must be at most 1");
  }
  r.finish();
  return s;
}

TrainSection parse_train(const Json& j, const std::filesystem::path& base) {
  Reader r(j, "/train");
  TrainSection t;
  t.corpus = resolve(base, as_string(r.get("corpus"), r.at("corpus")));
  t.out_dir = base / "checkpoints";
  if (const Json* v = r.find("out_dir")) t.out_dir = resolve(base, as_string(*v, r.at("out_dir")));
  opt_uint(r, "seq_len", t.seq_len, 1);
  opt_uint(r, "batch", t.batch, 1);
  if (const Json* v = r.find("eval_fraction")) {
    t.eval_fraction = as_positive(*v, r.at("eval_fraction"));
    if (t.eval_fraction >= 1.0) throw ConfigError(r.at("eval_fraction"), "must be below 1");
  }
  if (const Json* v = r.find("omega")) {
    t.omega = as_nonnegative(*v, r.at("omega"));
    if (t.omega > 1.0) throw ConfigError(r.at("omega"), "must lie in [0, 1]");
  }
  if (const Json* v = r.find("grad_clip")) t.grad_clip = as_nonnegative(*v, r.at("grad_clip"));
  opt_uint(r, "seed", t.seed);
  t.target = parse_schedule(r.get("target"), r.at("target"));
  t.drafts = parse_schedule(r.get("drafts"), r.at("drafts"));
  r.finish();
  return t;
}

SweepSection parse_sweep(const Json& j, const std::filesystem::path& base) {
  Reader r(j, "/sweep");
  SweepSection s;
  s.batch_sizes = as_uint_list(r.get("batch_sizes"), r.at("batch_sizes"), 1);
  s.context_lengths = as_uint_list(r.get("context_lengths"), r.at("context_lengths"), 1);
  const Json& list = r.get("scenarios");
  if (!list.is_array() || list.empty()) {
    throw ConfigError(r.at("scenarios"), "expected a nonempty array");
  }
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = r.at("scenarios") + "/" + std::to_string(i);
    Reader e(list[i], path);
    SweepScenario sc;
    sc.path = path;
    sc.name = as_string(e.get("name"), e.at("name"));
    sc.draft = as_string(e.get("draft"), e.at("draft"));
    if (const Json* tau = e.find("tau")) {
      if (tau->is_number()) {
        const double v = as_double(*tau, e.at("tau"));
        if (v < 1.0) throw ConfigError(e.at("tau"), "tau must be at least 1");
        sc.tau = v;
      } else {
        Reader t(*tau, e.at("tau"));
        TauFromCsv src;
        src.path = resolve(base, as_string(t.get("csv"), t.at("csv")));
        src.scenario = sc.name;
        if (const Json* v = t.find("scenario")) src.scenario = as_string(*v, t.at("scenario"));
        if (const Json* v = t.find("context")) src.context = as_uint(*v, t.at("context"), 1);
        t.finish();
        sc.tau = src;
      }
    }
    e.finish();
    s.scenarios.push_back(std::move(sc));
  }
  r.finish();
  return s;
}

ReportSection parse_report(const Json& j) {
  Reader r(j, "/report");
  ReportSection rep;
  rep.budget = as_nonnegative(r.get("budget"), r.at("budget"));
  const Json& rows = r.get("rows");
  if (!rows.is_array() || rows.empty()) throw ConfigError(r.at("rows"), "expected a nonempty array");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Reader e(rows[i], r.at("rows") + "/" + std::to_string(i));
    ReportRow row;
    row.name = as_string(e.get("name"), e.at("name"));
    const Json& m = e.get("multiplier");
    if (m.is_number()) {
      row.multiplier = as_double(m, e.at("multiplier"));
    } else {
      Reader c(m, e.at("multiplier"));
      SweepCell cell;
      cell.scenario = as_string(c.get("scenario"), c.at("scenario"));
      cell.batch = as_uint(c.get("batch"), c.at("batch"), 1);
      cell.context = as_uint(c.get("context"), c.at("context"), 1);
      c.finish();
      row.multiplier = cell;
    }
    if (const Json* v = e.find("train_cost")) row.train_cost = as_nonnegative(*v, e.at("train_cost"));
    e.finish();
    rep.rows.push_back(std::move(row));
  }
  r.finish();
  return rep;
}

}  // namespace

const ModelEntry* ModelsSection::find(const std::string& name) const {
  for (const auto& d : drafts) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

tinymodel::TrainConfig TrainSection::config_for(const Schedule& schedule, arch::Count k,
                                                std::uint64_t model_seed) const {
  tinymodel::TrainConfig cfg;
  cfg.k = k;
  cfg.omega = omega;
  cfg.lr = schedule.lr;
  cfg.min_lr_ratio = schedule.min_lr_ratio;
  cfg.warmup_steps = schedule.warmup;
  cfg.steps = schedule.steps;
  cfg.batch = batch;
  cfg.seq_len = seq_len;
  cfg.seed = model_seed;
  cfg.grad_clip = grad_clip;
  return cfg;
}

Config parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  Reader root(doc, "");
  Config c;
  c.base_dir = base_dir;
  std::filesystem::path out_dir = base_dir / "checkpoints";
  if (const Json* t = root.find("train")) {
    c.train = parse_train(*t, base_dir);
    out_dir = c.train->out_dir;
  }
  if (const Json* h = root.find("hardware")) c.hardware = parse_hardware(*h);
  if (const Json* m = root.find("models")) c.models = parse_models(*m, base_dir, out_dir);
  if (const Json* s = root.find("specdec")) c.specdec = parse_specdec(*s);
  if (const Json* s = root.find("sweep")) c.sweep = parse_sweep(*s, base_dir);
  if (const Json* s = root.find("report")) c.report = parse_report(*s);
  root.finish();
  if (c.sweep && c.models) {
    for (const auto& sc : c.sweep->scenarios) {
      if (c.models->find(sc.draft) == nullptr) {
        throw ConfigError(sc.path + "/draft", "no draft named \"" + sc.draft + "\" in /models/drafts");
      }
    }
  }
  if (c.specdec && c.train && c.train->seq_len % c.specdec->k != 0) {
    throw ConfigError("/train/seq_len", "must be divisible by /specdec/k");
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::absolute(path).parent_path());
}

#define SPECDEC_LAB_REQUIRE(section, type)                                           \
  const type& require_##section(const Config& c) {                                   \
    if (!c.section) throw ConfigError("/" #section, "section is required here");     \
    return *c.section;                                                               \
  }
SPECDEC_LAB_REQUIRE(hardware, costmodel::HardwareSpec)
SPECDEC_LAB_REQUIRE(models, ModelsSection)
SPECDEC_LAB_REQUIRE(specdec, SpecdecSection)
SPECDEC_LAB_REQUIRE(train, TrainSection)
SPECDEC_LAB_REQUIRE(sweep, SweepSection)
SPECDEC_LAB_REQUIRE(report, ReportSection)
#undef SPECDEC_LAB_REQUIRE

}  // namespace specdec_lab::cli
