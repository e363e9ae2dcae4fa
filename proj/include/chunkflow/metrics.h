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

#ifndef CHUNKFLOW_METRICS_H_
#define CHUNKFLOW_METRICS_H_

#include <span>

#include "chunkflow/chunking.h"
#include "chunkflow/types.h"

namespace chunkflow {

struct EpisodeMetrics {
  bool success = false;
  int env_steps = 0;
  double l2_mean = 0.0;
  double l2_max = 0.0;
  double max_acc = 0.0;
  double max_jerk = 0.0;

  bool operator==(const EpisodeMetrics&) const = default;
};

struct L2Summary {
  double mean = 0.0;
  double max = 0.0;
};

// Mean and max of |first_action_new - last_action_old| over the events;
// (0, 0) for an empty list.
L2Summary ChunkSwitchL2(std::span<const BoundaryEvent> events);

struct KinematicPeaks {
  double max_acc = 0.0;
  double max_jerk = 0.0;
};

// Peak L2 norms of the second and third finite differences of a T x D
// action sequence (one row per tick). A quantity whose stencil does not fit
// (T < 3 for acceleration, T < 4 for jerk) is reported as 0.
KinematicPeaks MaxAccJerk(const Eigen::MatrixXd& actions);

struct SuiteValue {
  int count = 1;  // N_s
  double value = 0.0;
};

// sum N_s m_s / sum N_s. Throws StructuralError on an empty list or N_s < 1.
double AggregateWeighted(std::span<const SuiteValue> suites);

// Largest per-suite value. Throws StructuralError on an empty list.
double WorstCase(std::span<const double> suite_values);

}  // namespace chunkflow

#endif  // CHUNKFLOW_METRICS_H_
