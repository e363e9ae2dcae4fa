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

#include "chunkflow/metrics.h"

#include <algorithm>

#include "chunkflow/errors.h"

namespace chunkflow {

L2Summary ChunkSwitchL2(std::span<const BoundaryEvent> events) {
  L2Summary out;
  if (events.empty()) return out;
  double total = 0.0;
  for (const auto& e : events) {
    const double jump = (e.first_action_new - e.last_action_old).norm();
    total += jump;
    out.max = std::max(out.max, jump);
  }
  out.mean = total / static_cast<double>(events.size());
  // Summation rounding must not break mean <= max.
  out.mean = std::min(out.mean, out.max);
  return out;
}

KinematicPeaks MaxAccJerk(const Eigen::MatrixXd& actions) {
  KinematicPeaks out;
  const Eigen::Index T = actions.rows();
  for (Eigen::Index t = 1; t + 1 < T; ++t) {
    const double acc =
        (actions.row(t + 1) - 2.0 * actions.row(t) + actions.row(t - 1)).norm();
    out.max_acc = std::max(out.max_acc, acc);
  }
  for (Eigen::Index t = 1; t + 2 < T; ++t) {
    const double jerk = (actions.row(t + 2) - 3.0 * actions.row(t + 1) +
                         3.0 * actions.row(t) - actions.row(t - 1))
                            .norm();
    out.max_jerk = std::max(out.max_jerk, jerk);
  }
  return out;
}

double AggregateWeighted(std::span<const SuiteValue> suites) {
  if (suites.empty()) throw StructuralError("no suites to aggregate");
  double weighted = 0.0;
  double total = 0.0;
  for (const auto& s : suites) {
    if (s.count < 1) throw StructuralError("suite weight N_s must be >= 1");
    weighted += static_cast<double>(s.count) * s.value;
    total += static_cast<double>(s.count);
  }
  return weighted / total;
}

double WorstCase(std::span<const double> suite_values) {
  if (suite_values.empty()) throw StructuralError("no suites for worst case");
  return *std::max_element(suite_values.begin(), suite_values.end());
}

}  // namespace chunkflow
