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

#include "specdec_lab/tinymodel/corpus.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "specdec_lab/errors.hpp"

namespace specdec_lab::tinymodel {

Corpus::Corpus(std::vector<std::uint8_t> bytes, double eval_fraction) : bytes_(std::move(bytes)) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw InvalidArgument("Corpus: eval_fraction must lie in (0, 1)");
  }
  const auto held_out = static_cast<std::size_t>(
      std::ceil(static_cast<double>(bytes_.size()) * eval_fraction));
  eval_start_ = bytes_.size() - held_out;
}

Corpus Corpus::load(const std::filesystem::path& path, double eval_fraction) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidArgument("cannot open corpus " + path.string());
  }
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  return Corpus(std::move(bytes), eval_fraction);
}

std::span<const std::uint8_t> Corpus::split(Split which) const {
  const std::span<const std::uint8_t> all(bytes_);
  return which == Split::Train ? all.first(eval_start_) : all.subspan(eval_start_);
}

SequenceBatch Corpus::sample(Split which, std::size_t batch, std::size_t length, Rng& rng) const {
  const auto data = split(which);
  if (length == 0 || data.size() < length) {
    throw InvalidArgument("Corpus::sample: split shorter than the sequence length");
  }
  SequenceBatch out;
  out.batch = batch;
  out.length = length;
  out.tokens.reserve(batch * length);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto start = static_cast<std::size_t>(rng.next_below(data.size() - length + 1));
    for (std::size_t t = 0; t < length; ++t) {
      out.tokens.push_back(static_cast<TokenId>(data[start + t]));
    }
  }
  return out;
}

std::vector<std::vector<TokenId>> Corpus::contexts(Split which, std::size_t count,
                                                   std::size_t length) const {
  const auto data = split(which);
  if (length == 0 || data.size() < length) {
    throw InvalidArgument("Corpus::contexts: split shorter than the context length");
  }
  const std::size_t span = data.size() - length;
  std::vector<std::vector<TokenId>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = count > 1 ? span * i / (count - 1) : 0;
    out.emplace_back(data.begin() + static_cast<std::ptrdiff_t>(start),
                     data.begin() + static_cast<std::ptrdiff_t>(start + length));
  }
  return out;
}

}  // namespace specdec_lab::tinymodel
