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
#include <stdexcept>
#include <string>

namespace specdec_lab {

/// Precondition violated by a caller-supplied value.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// residual(p, q) requested for p == q, where rejection cannot happen.
class UndefinedResidual : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Training produced a non-finite loss.
class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(std::int64_t step, const std::string& what)
      : std::runtime_error("training failed at step " + std::to_string(step) + ": " + what),
        step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

/// Checkpoint file does not match the architecture it is loaded into.
class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace specdec_lab
