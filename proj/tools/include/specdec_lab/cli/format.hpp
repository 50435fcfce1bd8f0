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
#include <string>
#include <string_view>
#include <vector>

namespace specdec_lab::cli {

/// Shortest round-trip decimal form, no locale ("0.1", "2", "1e+20").
std::string format_double(double value);

/// Fixed notation with `digits` decimals, no locale.
std::string format_fixed(double value, int digits);

/// Comma-joined row terminated by LF.
std::string csv_row(const std::vector<std::string>& fields);

/// Header plus rows of a CSV file in this tool's dialect (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column or -1.
  int column(std::string_view name) const;
};
CsvTable parse_csv(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace specdec_lab::cli
