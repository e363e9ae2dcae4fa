// Copyright 2026 The chunkflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CHUNKFLOW_ERRORS_H_
#define CHUNKFLOW_ERRORS_H_

#include <stdexcept>
#include <string>

namespace chunkflow {

// Shape or index contract violated (mismatched chunk dimensions, empty
// mixtures, offsets past the horizon).
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of a formula, e.g. a guidance
// weight requested at tau = 0 or tau = 1.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A computation produced a non-finite value. Carries the denoising step and
// flattened coordinate where it was detected (-1 when not applicable).
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, int step_index, int coordinate = -1)
      : std::runtime_error(what + " (step " + std::to_string(step_index) +
                           ", coordinate " + std::to_string(coordinate) + ")"),
        step_index_(step_index),
        coordinate_(coordinate) {}

  int step_index() const { return step_index_; }
  int coordinate() const { return coordinate_; }

 private:
  int step_index_;
  int coordinate_;
};

// Output location missing, unwritable, or an input file unreadable.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace chunkflow

#endif  // CHUNKFLOW_ERRORS_H_
