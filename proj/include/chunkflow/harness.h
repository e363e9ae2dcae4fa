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

#ifndef CHUNKFLOW_HARNESS_H_
#define CHUNKFLOW_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "chunkflow/bench_env.h"
#include "chunkflow/chunking.h"
#include "chunkflow/guidance.h"
#include "chunkflow/metrics.h"
#include "chunkflow/results.h"

namespace chunkflow {

struct ExperimentConfig {
  std::vector<GuidanceMethod> methods = {
      GuidanceMethod::kNaive, GuidanceMethod::kRtc, GuidanceMethod::kPc,
      GuidanceMethod::kPotr};
  std::vector<int> delays = {0, 1, 2, 3, 4, 5};
  int episodes_per_cell = 50;
  uint64_t seed_base = 0;
  // sigma_d, rho, n, epsilon shared by every cell; `method` is set per cell.
  GuidanceConfig guidance;
  // beta = n unless overridden.
  std::optional<double> beta_override;
  std::vector<BenchVariant> variants = DefaultVariants();
  double mask_decay = 0.5;
  // Replan step for every cell; max(d, 1) when unset.
  std::optional<int> replan_override;
  // Delay used by the sigma_d / rho grid searches.
  int grid_delay = 3;
  std::filesystem::path output_dir = "results";
  // Fraction of schedule-overrun episodes tolerated before a run is
  // reported as failed.
  double max_overrun_fraction = 0.0;
  // Worker threads; 0 picks std::thread::hardware_concurrency().
  int threads = 0;
};

// Throws StructuralError on an invalid configuration.
void ValidateExperimentConfig(const ExperimentConfig& config);

// Guidance settings for one cell, applying the beta = n rule.
GuidanceConfig CellGuidance(const ExperimentConfig& config,
                            GuidanceMethod method);

// Method-independent episode seed: seed_base + hash(delay, variant, episode).
uint64_t EpisodeSeed(uint64_t seed_base, int delay, int variant_index,
                     int episode);

struct EpisodeOutcome {
  EpisodeMetrics metrics;
  bool schedule_overrun = false;
  Eigen::MatrixXd actions;  // executed (clipped) actions, one row per tick
  std::vector<BoundaryEvent> events;
  std::vector<ChunkRecord> records;  // filled when keep_records
};

// Runs one closed-loop episode. The environment noise and the denoiser noise
// are derived from `seed` only, so every method sees the same sequences.
EpisodeOutcome RunEpisode(const BenchVariant& variant,
                          const GuidanceConfig& guidance, int delay,
                          double mask_decay, uint64_t seed,
                          bool keep_records = false,
                          std::optional<int> replan_every = std::nullopt);

struct SweepResult {
  std::vector<ResultRow> rows;  // ordered by method, delay, variant, episode
  int schedule_overruns = 0;
};

SweepResult RunSweep(const ExperimentConfig& config);

std::map<std::string, int> SuiteWeights(const ExperimentConfig& config);

// Creates the directory if needed and checks it is writable. Throws IoError.
void PrepareOutputDir(const std::filesystem::path& dir);

// Writes rows.csv and summary.json into config.output_dir. Returns the
// summary document.
nlohmann::json SaveSweep(const ExperimentConfig& config,
                         const SweepResult& result,
                         std::vector<std::string>* warnings = nullptr);

struct GridRow {
  double value = 0.0;
  MetricMeans means;
  int schedule_overruns = 0;
};

// PC at each sigma_d (rho unused), delay config.grid_delay.
std::vector<GridRow> GridSearchSigma(const ExperimentConfig& config,
                                     std::span<const double> grid,
                                     std::vector<ResultRow>* rows = nullptr);

// POTR at config.guidance.sigma_d for each rho, delay config.grid_delay.
std::vector<GridRow> GridSearchRho(const ExperimentConfig& config,
                                   std::span<const double> grid,
                                   std::vector<ResultRow>* rows = nullptr);

inline constexpr std::string_view kSigmaGridColumn = "sigma_d";
inline constexpr std::string_view kRhoGridColumn = "rho";

// "<param>,success,steps,l2_m,l2_M,acc,jerk" followed by one line per row.
void WriteGridTable(std::ostream& out, std::string_view param_column,
                    std::span<const GridRow> rows);

inline const std::vector<double> kSigmaGrid = {0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
inline const std::vector<double> kRhoGrid = {0.10, 0.25, 0.50, 0.75, 1.00};

}  // namespace chunkflow

#endif  // CHUNKFLOW_HARNESS_H_
