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

#ifndef CHUNKFLOW_TYPES_H_
#define CHUNKFLOW_TYPES_H_

#include <optional>

#include <Eigen/Dense>

namespace chunkflow {

// H x D matrix of normalized actions. Row i is the action for the i-th
// control tick after the chunk's origin.
using ActionChunk = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Obstacle {
  Vector center;
  double radius = 0.0;
};

// Conditioning input o handed to a velocity field.
struct Observation {
  Vector position;
  Vector goal;
  std::optional<Obstacle> obstacle;
};

}  // namespace chunkflow

#endif  // CHUNKFLOW_TYPES_H_
