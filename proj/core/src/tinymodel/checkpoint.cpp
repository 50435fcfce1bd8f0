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

#include "specdec_lab/tinymodel/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "specdec_lab/errors.hpp"

namespace specdec_lab::tinymodel {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'S', 'D', 'L', 'B'};

json spec_json(const arch::TransformerSpec& s) {
  json attention = {{"kind", s.attention.is_streaming() ? "streaming" : "dense"}};
  if (s.attention.is_streaming()) {
    attention["window"] = s.attention.window;
    attention["sink"] = s.attention.sink;
  }
  return json{{"n_layer", s.n_layer},
              {"d_model", s.d_model},
              {"n_heads", s.n_heads},
              {"n_kv_heads", s.n_kv_heads},
              {"d_head", s.d_head},
              {"d_ff", s.d_ff},
              {"vocab", s.vocab},
              {"bytes_per_param", s.bytes_per_param},
              {"attention", attention},
              {"positions", s.positions == arch::PositionMode::CacheRelative ? "cache_relative"
                                                                             : "text_absolute"}};
}

arch::TransformerSpec parse_spec(const json& j) {
  arch::TransformerSpec s;
  s.n_layer = j.at("n_layer").get<arch::Count>();
  s.d_model = j.at("d_model").get<arch::Count>();
  s.n_heads = j.at("n_heads").get<arch::Count>();
  s.n_kv_heads = j.at("n_kv_heads").get<arch::Count>();
  s.d_head = j.at("d_head").get<arch::Count>();
  s.d_ff = j.at("d_ff").get<arch::Count>();
  s.vocab = j.at("vocab").get<arch::Count>();
  s.bytes_per_param = j.at("bytes_per_param").get<arch::Count>();
  const json& a = j.at("attention");
  if (a.at("kind").get<std::string>() == "streaming") {
    s.attention = arch::AttentionPolicy::streaming(a.at("window").get<arch::Count>(),
                                                   a.at("sink").get<arch::Count>());
  }
  s.positions = j.at("positions").get<std::string>() == "cache_relative"
                    ? arch::PositionMode::CacheRelative
                    : arch::PositionMode::TextAbsolute;
  return s;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t offset, int bytes) {
  if (offset + static_cast<std::size_t>(bytes) > in.size()) {
    throw CheckpointMismatch("checkpoint truncated");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(in[offset + static_cast<std::size_t>(i)]) << (8 * i);
  }
  return v;
}

std::vector<std::uint8_t> encode(const std::vector<Tensor<float>>& params,
                                 const std::vector<std::string>& names, const CheckpointInfo& info) {
  json header = {{"kind", info.kind == CheckpointKind::Spire ? "spire" : "transformer"},
                 {"variant", info.variant},
                 {"spec", spec_json(info.spec)},
                 {"seed", info.seed},
                 {"step", info.step}};
  if (info.kind == CheckpointKind::Spire) {
    header["substitution_offset"] = info.substitution_offset;
  }
  json entries = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    entries.push_back({{"name", names[i]}, {"shape", {params[i].rows(), params[i].cols()}}});
  }
  header["params"] = std::move(entries);
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& p : params) {
    const auto& m = p.value();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      std::uint32_t bits = 0;
      const float f = m.data()[i];
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
  }
  return out;
}

struct Decoded {
  json header;
  CheckpointInfo info;
  std::vector<std::uint8_t> bytes;
  std::size_t blob_offset = 0;
};

Decoded decode(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointMismatch("cannot open checkpoint " + path.string());
  }
  Decoded d;
  d.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  if (d.bytes.size() < 16 || std::memcmp(d.bytes.data(), kMagic, 4) != 0) {
    throw CheckpointMismatch("not a checkpoint: " + path.string());
  }
  const auto version = get_le(d.bytes, 4, 4);
  if (version != kCheckpointVersion) {
    throw CheckpointMismatch("unsupported checkpoint version " + std::to_string(version));
  }
  const auto length = get_le(d.bytes, 8, 8);
  if (16 + length > d.bytes.size()) {
    throw CheckpointMismatch("checkpoint header truncated");
  }
  try {
    d.header = json::parse(d.bytes.begin() + 16, d.bytes.begin() + 16 + static_cast<std::ptrdiff_t>(length));
    d.info.kind = d.header.at("kind").get<std::string>() == "spire" ? CheckpointKind::Spire
                                                                     : CheckpointKind::Transformer;
    d.info.variant = d.header.value("variant", "");
    d.info.spec = parse_spec(d.header.at("spec"));
    d.info.seed = d.header.at("seed").get<std::uint64_t>();
    d.info.step = d.header.at("step").get<std::uint64_t>();
    d.info.substitution_offset = d.header.value("substitution_offset", std::size_t{0});
  } catch (const json::exception& e) {
    throw CheckpointMismatch(std::string("malformed checkpoint header: ") + e.what());
  }
  d.blob_offset = 16 + length;
  return d;
}

void fill(const Decoded& d, const std::vector<Tensor<float>>& params,
          const std::vector<std::string>& names) {
  const json& entries = d.header.at("params");
  if (entries.size() != params.size()) {
    throw CheckpointMismatch("checkpoint holds " + std::to_string(entries.size()) +
                             " parameters, model expects " + std::to_string(params.size()));
  }
  std::size_t offset = d.blob_offset;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = entries[i];
    const auto rows = e.at("shape").at(0).get<Eigen::Index>();
    const auto cols = e.at("shape").at(1).get<Eigen::Index>();
    if (e.at("name").get<std::string>() != names[i] || rows != params[i].rows() ||
        cols != params[i].cols()) {
      throw CheckpointMismatch("parameter " + names[i] + " does not match checkpoint entry " +
                               e.at("name").get<std::string>());
    }
    Tensor<float> p = params[i];
    auto& m = p.mutable_value();
    for (Eigen::Index j = 0; j < m.size(); ++j) {
      const auto bits = static_cast<std::uint32_t>(get_le(d.bytes, offset, 4));
      std::memcpy(m.data() + j, &bits, sizeof bits);
      offset += 4;
    }
  }
  if (offset != d.bytes.size()) {
    throw CheckpointMismatch("trailing bytes after parameter blobs");
  }
}

void check_expected(const CheckpointInfo& info, CheckpointKind kind,
                    const std::optional<arch::TransformerSpec>& expected) {
  if (info.kind != kind) {
    throw CheckpointMismatch(kind == CheckpointKind::Spire
                                 ? "expected a feedback-draft checkpoint"
                                 : "expected a transformer checkpoint");
  }
  if (expected && !(*expected == info.spec)) {
    throw CheckpointMismatch("checkpoint spec " + spec_json(info.spec).dump() +
                             " differs from configured spec " + spec_json(*expected).dump());
  }
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const TransformerParams<float>& params,
                                            const CheckpointInfo& info) {
  CheckpointInfo i = info;
  i.kind = CheckpointKind::Transformer;
  i.spec = params.spec;
  return encode(params.parameters(), params.parameter_names(), i);
}

std::vector<std::uint8_t> encode_checkpoint(const SpireParams<float>& params,
                                            const CheckpointInfo& info) {
  CheckpointInfo i = info;
  i.kind = CheckpointKind::Spire;
  i.spec = params.body.spec;
  i.substitution_offset = params.substitution_offset;
  return encode(params.parameters(), params.parameter_names(), i);
}

void save_checkpoint(const std::filesystem::path& path, const TransformerParams<float>& params,
                     const CheckpointInfo& info) {
  write_bytes(path, encode_checkpoint(params, info));
}

void save_checkpoint(const std::filesystem::path& path, const SpireParams<float>& params,
                     const CheckpointInfo& info) {
  write_bytes(path, encode_checkpoint(params, info));
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  return decode(path).info;
}

TransformerParams<float> load_transformer(const std::filesystem::path& path,
                                          const std::optional<arch::TransformerSpec>& expected,
                                          CheckpointInfo* info) {
  const Decoded d = decode(path);
  check_expected(d.info, CheckpointKind::Transformer, expected);
  auto params = TransformerParams<float>::random(d.info.spec, 0);
  fill(d, params.parameters(), params.parameter_names());
  if (info != nullptr) {
    *info = d.info;
  }
  return params;
}

SpireParams<float> load_spire(const std::filesystem::path& path,
                              const std::optional<arch::TransformerSpec>& expected,
                              CheckpointInfo* info) {
  const Decoded d = decode(path);
  check_expected(d.info, CheckpointKind::Spire, expected);
  SpireParams<float> params;
  params.body = TransformerParams<float>::random(d.info.spec, 0);
  const auto n = static_cast<Eigen::Index>(d.info.spec.n_layer);
  params.mix = Tensor<float>::parameter(Matrix<float>::Zero(n, n + 1));
  params.substitution_offset = d.info.substitution_offset;
  fill(d, params.parameters(), params.parameter_names());
  if (info != nullptr) {
    *info = d.info;
  }
  return params;
}

std::string spec_to_json(const arch::TransformerSpec& spec) { return spec_json(spec).dump(); }

arch::TransformerSpec spec_from_json(const std::string& text) {
  try {
    return parse_spec(json::parse(text));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad spec json: ") + e.what());
  }
}

}  // namespace specdec_lab::tinymodel
