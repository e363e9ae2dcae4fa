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

#ifndef CHUNKFLOW_RESULTS_H_
#define CHUNKFLOW_RESULTS_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chunkflow/guidance.h"
#include "chunkflow/metrics.h"

namespace chunkflow {

// One episode of one (method, delay, suite, seed) cell.
struct ResultRow {
  GuidanceMethod method = GuidanceMethod::kNaive;
  int delay = 0;
  std::string suite;
  uint64_t seed = 0;
  EpisodeMetrics metrics;

  bool operator==(const ResultRow&) const = default;
};

inline constexpr std::string_view kRowsHeader =
    "method,delay,suite,seed,success,env_steps,l2_mean,l2_max,max_acc,"
    "max_jerk";

// Doubles are written in shortest round-trip form, so ReadRowsCsv(WriteRowsCsv
// (rows)) == rows.
void WriteRowsCsv(std::ostream& out, std::span<const ResultRow> rows);
// Throws IoError on a wrong header or malformed line.
std::vector<ResultRow> ReadRowsCsv(std::istream& in);

// The six reported metrics. env_steps averages successful episodes only and
// is NaN when there are none; NaN also marks "no data" after aggregation.
struct MetricMeans {
  double success = 0.0;
  double env_steps = 0.0;
  double l2_mean = 0.0;
  double l2_max = 0.0;
  double max_acc = 0.0;
  double max_jerk = 0.0;
};

// Plain means over a set of episodes (typically one suite of one cell).
MetricMeans EpisodeMeans(std::span<const ResultRow> rows);

struct WeightedSuite {
  int count = 1;  // N_s
  MetricMeans means;
};

// Episode-weighted cross-suite mean, per metric, through AggregateWeighted.
// Suites whose value for a metric is NaN do not contribute to that metric.
MetricMeans AggregateSuites(std::span<const WeightedSuite> suites);

// Episode-weighted aggregate for one method at one delay.
MetricMeans AggregateCell(std::span<const ResultRow> rows,
                          GuidanceMethod method, int delay,
                          const std::map<std::string, int>& suite_weights);

inline const std::vector<int> kAggregateDelays = {1, 2, 3, 4, 5};

// Builds the summary document: per-method delay 1-5 means, per-delay
// breakdown, relative change vs RTC, and per-suite worst case. Warnings
// (e.g. missing RTC rows) are appended to `warnings` and to the document.
nlohmann::json EmitSummary(std::span<const ResultRow> rows,
                           const std::map<std::string, int>& suite_weights,
                           std::vector<std::string>* warnings = nullptr);

// (value - reference) / reference in percent; NaN when the reference is 0.
double RelativeChangePercent(double value, double reference);

}  // namespace chunkflow

#endif  // CHUNKFLOW_RESULTS_H_
