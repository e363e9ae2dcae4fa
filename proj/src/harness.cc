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

#include "chunkflow/harness.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "chunkflow/errors.h"
#include "chunkflow/random.h"

namespace chunkflow {
namespace {

struct Cell {
  GuidanceConfig guidance;
  int delay = 0;
  int variant = 0;
  int episode = 0;
};

struct CellResult {
  ResultRow row;
  bool overrun = false;
};

std::vector<CellResult> RunCells(const ExperimentConfig& config,
                                 const std::vector<Cell>& cells) {
  std::vector<CellResult> results(cells.size());
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      const BenchVariant& variant = config.variants[cell.variant];
      const uint64_t seed = EpisodeSeed(config.seed_base, cell.delay,
                                        cell.variant, cell.episode);
      try {
        const EpisodeOutcome outcome = RunEpisode(
            variant, cell.guidance, cell.delay, config.mask_decay, seed,
            false, config.replan_override);
        results[i].row = ResultRow{cell.guidance.method, cell.delay,
                                   variant.id, seed, outcome.metrics};
        results[i].overrun = outcome.schedule_overrun;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(cells.size());
        return;
      }
    }
  };

  int threads = config.threads > 0
                    ? config.threads
                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, std::max<int>(1, cells.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<Cell> CellsFor(const ExperimentConfig& config,
                           const GuidanceConfig& guidance, int delay) {
  std::vector<Cell> cells;
  for (int v = 0; v < static_cast<int>(config.variants.size()); ++v) {
    for (int e = 0; e < config.episodes_per_cell; ++e) {
      cells.push_back({guidance, delay, v, e});
    }
  }
  return cells;
}

GridRow SummarizeGridValue(const ExperimentConfig& config, double value,
                           const std::vector<CellResult>& results,
                           std::vector<ResultRow>* rows) {
  std::vector<WeightedSuite> suites;
  for (const auto& variant : config.variants) {
    std::vector<ResultRow> suite_rows;
    for (const auto& r : results) {
      if (r.row.suite == variant.id) suite_rows.push_back(r.row);
    }
    suites.push_back({variant.weight, EpisodeMeans(suite_rows)});
    if (rows) rows->insert(rows->end(), suite_rows.begin(), suite_rows.end());
  }
  return GridRow{value, AggregateSuites(suites)};
}

}  // namespace

void ValidateExperimentConfig(const ExperimentConfig& config) {
  if (config.methods.empty()) throw StructuralError("no methods selected");
  if (config.delays.empty()) throw StructuralError("no delays selected");
  if (config.episodes_per_cell < 1) {
    throw StructuralError("episodes_per_cell must be >= 1");
  }
  if (config.variants.empty()) throw StructuralError("no task variants");
  std::set<std::string> ids;
  for (const auto& v : config.variants) {
    if (v.id.empty() || v.id.find(',') != std::string::npos ||
        !ids.insert(v.id).second) {
      throw StructuralError("variant ids must be unique, non-empty, no commas");
    }
    if (v.weight < 1) throw StructuralError("variant weight must be >= 1");
    if (v.policy.horizon < 1) throw StructuralError("horizon must be >= 1");
    for (int d : config.delays) {
      if (d < 0 || d >= v.policy.horizon) {
        throw StructuralError("delay " + std::to_string(d) +
                              " must satisfy 0 <= d < H");
      }
    }
    if (config.grid_delay < 0 || config.grid_delay >= v.policy.horizon) {
      throw StructuralError("grid_delay must satisfy 0 <= d < H");
    }
    if (config.replan_override && (*config.replan_override < 1 ||
                                   *config.replan_override > v.policy.horizon)) {
      throw StructuralError("replan step must satisfy 1 <= s <= H");
    }
  }
  std::set<GuidanceMethod> seen;
  for (GuidanceMethod m : config.methods) {
    if (!seen.insert(m).second) throw StructuralError("duplicate method");
  }
  ValidateGuidanceConfig(CellGuidance(config, GuidanceMethod::kPotr));
  if (!(config.mask_decay > 0.0 && config.mask_decay <= 1.0)) {
    throw StructuralError("mask_decay must be in (0, 1]");
  }
  if (!(config.max_overrun_fraction >= 0.0 &&
        config.max_overrun_fraction <= 1.0)) {
    throw StructuralError("max_overrun_fraction must be in [0, 1]");
  }
}

GuidanceConfig CellGuidance(const ExperimentConfig& config,
                            GuidanceMethod method) {
  GuidanceConfig g = config.guidance;
  g.method = method;
  g.beta = config.beta_override.value_or(static_cast<double>(g.n));
  return g;
}

uint64_t EpisodeSeed(uint64_t seed_base, int delay, int variant_index,
                     int episode) {
  return seed_base + DeriveSeed(0, {static_cast<uint64_t>(delay),
                                    static_cast<uint64_t>(variant_index),
                                    static_cast<uint64_t>(episode)});
}

EpisodeOutcome RunEpisode(const BenchVariant& variant,
                          const GuidanceConfig& guidance, int delay,
                          double mask_decay, uint64_t seed,
                          bool keep_records, std::optional<int> replan_every) {
  PointMassEnv env(variant.env, DeriveSeed(seed, {1}));
  const OraclePolicyField field(variant.policy);
  ExecutorOptions options;
  options.delay = delay;
  options.guidance = guidance;
  options.mask_decay = mask_decay;
  options.replan_every = replan_every;
  options.noise_seed = DeriveSeed(seed, {2});
  options.keep_records = keep_records;
  const int action_dim = static_cast<int>(variant.env.start.size());
  ChunkExecutor executor(field, options, variant.policy.horizon, action_dim);

  EpisodeOutcome outcome;
  std::vector<Vector> actions;
  while (!env.done()) {
    StepOutput step;
    try {
      step = executor.Step(env.Observe());
    } catch (const ScheduleOverrun&) {
      outcome.schedule_overrun = true;
      break;
    }
    if (step.boundary) outcome.events.push_back(*step.boundary);
    env.Step(step.action);
    actions.push_back(std::move(step.action));
  }

  outcome.actions.resize(static_cast<Eigen::Index>(actions.size()), action_dim);
  for (size_t t = 0; t < actions.size(); ++t) {
    outcome.actions.row(static_cast<Eigen::Index>(t)) = actions[t].transpose();
  }
  const L2Summary l2 = ChunkSwitchL2(outcome.events);
  const KinematicPeaks peaks = MaxAccJerk(outcome.actions);
  outcome.metrics.success = env.success();
  outcome.metrics.env_steps = env.step_count();
  outcome.metrics.l2_mean = l2.mean;
  outcome.metrics.l2_max = l2.max;
  outcome.metrics.max_acc = peaks.max_acc;
  outcome.metrics.max_jerk = peaks.max_jerk;
  if (keep_records) outcome.records = executor.records();
  return outcome;
}

SweepResult RunSweep(const ExperimentConfig& config) {
  ValidateExperimentConfig(config);
  std::vector<Cell> cells;
  for (GuidanceMethod method : config.methods) {
    const GuidanceConfig guidance = CellGuidance(config, method);
    for (int delay : config.delays) {
      auto block = CellsFor(config, guidance, delay);
      cells.insert(cells.end(), block.begin(), block.end());
    }
  }
  SweepResult result;
  for (auto& r : RunCells(config, cells)) {
    result.rows.push_back(std::move(r.row));
    if (r.overrun) ++result.schedule_overruns;
  }
  return result;
}

std::map<std::string, int> SuiteWeights(const ExperimentConfig& config) {
  std::map<std::string, int> weights;
  for (const auto& v : config.variants) weights[v.id] = v.weight;
  return weights;
}

void PrepareOutputDir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "ok")) {
      throw IoError("output directory '" + dir.string() + "' is not writable");
    }
  }
  std::filesystem::remove(probe, ec);
}

nlohmann::json SaveSweep(const ExperimentConfig& config,
                         const SweepResult& result,
                         std::vector<std::string>* warnings) {
  PrepareOutputDir(config.output_dir);
  {
    std::ofstream out(config.output_dir / "rows.csv");
    WriteRowsCsv(out, result.rows);
    if (!out) throw IoError("failed writing rows.csv");
  }
  nlohmann::json summary =
      EmitSummary(result.rows, SuiteWeights(config), warnings);
  summary["schedule_overruns"] = result.schedule_overruns;
  summary["episodes"] = result.rows.size();
  std::ofstream out(config.output_dir / "summary.json");
  out << summary.dump(2) << '\n';
  if (!out) throw IoError("failed writing summary.json");
  return summary;
}

std::vector<GridRow> GridSearchSigma(const ExperimentConfig& config,
                                     std::span<const double> grid,
                                     std::vector<ResultRow>* rows) {
  ValidateExperimentConfig(config);
  if (grid.empty()) throw StructuralError("empty sigma_d grid");
  std::vector<GridRow> table;
  for (double sigma : grid) {
    GuidanceConfig guidance = CellGuidance(config, GuidanceMethod::kPc);
    guidance.sigma_d = sigma;
    ValidateGuidanceConfig(guidance);
    const auto results =
        RunCells(config, CellsFor(config, guidance, config.grid_delay));
    table.push_back(SummarizeGridValue(config, sigma, results, rows));
  }
  return table;
}

std::vector<GridRow> GridSearchRho(const ExperimentConfig& config,
                                   std::span<const double> grid,
                                   std::vector<ResultRow>* rows) {
  ValidateExperimentConfig(config);
  if (grid.empty()) throw StructuralError("empty rho grid");
  std::vector<GridRow> table;
  for (double rho : grid) {
    GuidanceConfig guidance = CellGuidance(config, GuidanceMethod::kPotr);
    guidance.rho = rho;
    ValidateGuidanceConfig(guidance);
    const auto results =
        RunCells(config, CellsFor(config, guidance, config.grid_delay));
    table.push_back(SummarizeGridValue(config, rho, results, rows));
  }
  return table;
}

void WriteGridTable(std::ostream& out, std::string_view param_column,
                    std::span<const GridRow> rows) {
  out << param_column << ",success,steps,l2_m,l2_M,acc,jerk\n";
  for (const auto& r : rows) {
    const auto& m = r.means;
    char value[32];
    std::snprintf(value, sizeof value, "%.2f", r.value);
    out << value << ',' << m.success << ',' << m.env_steps << ','
        << m.l2_mean << ',' << m.l2_max << ',' << m.max_acc << ','
        << m.max_jerk << '\n';
  }
}

}  // namespace chunkflow
