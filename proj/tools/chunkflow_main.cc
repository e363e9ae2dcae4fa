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

// chunkflow: delay sweeps, grid searches, summaries and the verification
// suite from the command line.
//
//   chunkflow sweep --config run.ini --out results/run1
//   chunkflow grid-sigma --episodes 20
//   chunkflow summarize --rows results/run1/rows.csv
//   chunkflow verify
//
// Exit codes: 0 ok, 1 configuration or I/O error, 2 too many schedule
// overruns, 3 verification failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chunkflow/errors.h"
#include "chunkflow/harness.h"
#include "chunkflow/verification.h"

namespace {

using namespace chunkflow;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitOverrun = 2;
constexpr int kExitVerify = 3;

// Everything a config file or flag can set. Defaults mirror the library's.
struct Settings {
  std::vector<std::string> methods = {"naive", "rtc", "pc", "potr"};
  std::vector<int> delays = {0, 1, 2, 3, 4, 5};
  int episodes = 50;
  uint64_t seed_base = 0;
  std::string out = "results";
  std::vector<std::string> variants = {"unimodal", "bimodal"};
  int unimodal_weight = 10;
  int bimodal_weight = 10;

  // Guidance.
  double sigma_d = 0.4;
  double rho = 0.5;
  std::optional<double> beta;
  int steps = 10;
  double epsilon = 1e-8;
  bool guide_at_tau_zero = false;

  // Chunking and protocol.
  double mask_decay = 0.5;
  std::optional<int> replan;
  int grid_delay = 3;
  std::vector<double> grid;
  double max_overrun_fraction = 0.0;
  int threads = 0;

  // Environment, applied to every variant.
  std::optional<int> max_steps;
  std::optional<double> goal_tolerance;
  std::optional<double> action_noise;
  std::optional<double> dynamics_gain;

  // Oracle policy, applied to every variant.
  std::optional<int> horizon;
  std::optional<double> sigma_cond;
  std::optional<double> controller_gain;
  std::optional<double> skirt_margin;
  std::optional<double> correlation_length;
  std::optional<double> white_fraction;
  std::optional<bool> center_rows;

  // Bimodal obstacle geometry.
  std::optional<double> obstacle_x;
  std::optional<double> obstacle_y;
  std::optional<double> obstacle_radius;
  std::optional<double> bimodal_goal_x;

  // summarize / verify.
  std::string rows;
  int verify_episodes = 200;
  int verify_samples = 250000;
  uint64_t verify_seed = 20261017;
};

void AddOptions(CLI::App& app, Settings& s) {
  app.add_option("--methods", s.methods,
                 "Methods to run: naive,rtc,pc,potr")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--delays", s.delays, "Inference delays d, e.g. 0,1,2,3")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--episodes", s.episodes, "Paired seeds per cell")
      ->capture_default_str();
  app.add_option("--seed-base", s.seed_base,
                 "Base of the method-independent episode seeds")
      ->capture_default_str();
  app.add_option("--out", s.out, "Output directory")->capture_default_str();
  app.add_option("--variants", s.variants, "Task variants: unimodal,bimodal")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--unimodal-weight", s.unimodal_weight,
                 "Suite weight N_s of the unimodal variant")
      ->capture_default_str();
  app.add_option("--bimodal-weight", s.bimodal_weight,
                 "Suite weight N_s of the bimodal variant")
      ->capture_default_str();

  app.add_option("--sigma-d", s.sigma_d, "Data-prior scale sigma_d")
      ->capture_default_str();
  app.add_option("--rho", s.rho, "Trust-region radius ratio; inf disables")
      ->capture_default_str();
  app.add_option("--beta", s.beta, "Weight clip; defaults to --steps");
  app.add_option("--steps", s.steps, "Denoising steps n")
      ->capture_default_str();
  app.add_option("--epsilon", s.epsilon, "Numerical stabilizer")
      ->capture_default_str();
  app.add_flag("--guide-at-tau-zero", s.guide_at_tau_zero,
               "Guide the k = 0 step with weight beta");

  app.add_option("--mask-decay", s.mask_decay,
                 "Soft-mask decay after the frozen prefix")
      ->capture_default_str();
  app.add_option("--replan", s.replan, "Replan step; max(d, 1) when unset");
  app.add_option("--grid-delay", s.grid_delay, "Delay for the grid searches")
      ->capture_default_str();
  app.add_option("--grid", s.grid,
                 "Grid values; the sigma_d or rho defaults when empty")
      ->delimiter(',');
  app.add_option("--max-overrun-fraction", s.max_overrun_fraction,
                 "Tolerated fraction of schedule-overrun episodes")
      ->capture_default_str();
  app.add_option("--threads", s.threads, "Worker threads; 0 = all cores")
      ->capture_default_str();

  app.add_option("--max-steps", s.max_steps, "Episode step limit");
  app.add_option("--goal-tolerance", s.goal_tolerance, "Goal radius");
  app.add_option("--action-noise", s.action_noise, "Action noise std");
  app.add_option("--dynamics-gain", s.dynamics_gain,
                 "Position change per unit action");
  app.add_option("--horizon", s.horizon, "Chunk horizon H");
  app.add_option("--sigma-cond", s.sigma_cond, "Per-mode chunk scale");
  app.add_option("--controller-gain", s.controller_gain,
                 "Mean-chunk controller gain");
  app.add_option("--skirt-margin", s.skirt_margin,
                 "Obstacle clearance of the skirting modes");
  app.add_option("--correlation-length", s.correlation_length,
                 "Row correlation length of the chunk prior");
  app.add_option("--white-fraction", s.white_fraction,
                 "Independent share of the row covariance");
  app.add_option("--center-rows", s.center_rows,
                 "Project the smooth prior off constant offsets");
  app.add_option("--obstacle-x", s.obstacle_x, "Bimodal obstacle center x");
  app.add_option("--obstacle-y", s.obstacle_y, "Bimodal obstacle center y");
  app.add_option("--obstacle-radius", s.obstacle_radius,
                 "Bimodal obstacle radius");
  app.add_option("--bimodal-goal-x", s.bimodal_goal_x, "Bimodal goal x");

  app.add_option("--rows", s.rows, "Row file for summarize");
  app.add_option("--verify-episodes", s.verify_episodes,
                 "Paired seeds per cell in the benchmark check")
      ->capture_default_str();
  app.add_option("--verify-samples", s.verify_samples,
                 "Importance samples per velocity probe")
      ->capture_default_str();
  app.add_option("--verify-seed", s.verify_seed, "Seed of the oracle checks")
      ->capture_default_str();
}

void ApplyVariantSettings(const Settings& s, BenchVariant& v) {
  if (s.max_steps) v.env.max_steps = *s.max_steps;
  if (s.goal_tolerance) v.env.goal_tolerance = *s.goal_tolerance;
  if (s.action_noise) v.env.action_noise_std = *s.action_noise;
  if (s.dynamics_gain) {
    v.env.dynamics_gain = *s.dynamics_gain;
    v.policy.dynamics_gain = *s.dynamics_gain;
  }
  if (s.horizon) v.policy.horizon = *s.horizon;
  if (s.sigma_cond) v.policy.sigma_cond = *s.sigma_cond;
  if (s.controller_gain) v.policy.controller_gain = *s.controller_gain;
  if (s.skirt_margin) v.policy.skirt_margin = *s.skirt_margin;
  if (s.correlation_length) {
    v.policy.correlation_length = *s.correlation_length;
  }
  if (s.white_fraction) v.policy.white_fraction = *s.white_fraction;
  if (s.center_rows) v.policy.center_rows = *s.center_rows;
  if (v.env.obstacle) {
    if (s.obstacle_x) v.env.obstacle->center(0) = *s.obstacle_x;
    if (s.obstacle_y) v.env.obstacle->center(1) = *s.obstacle_y;
    if (s.obstacle_radius) v.env.obstacle->radius = *s.obstacle_radius;
    if (s.bimodal_goal_x) v.env.goal(0) = *s.bimodal_goal_x;
  }
}

// Throws StructuralError on unknown names or invalid values.
ExperimentConfig BuildConfig(const Settings& s) {
  ExperimentConfig config;
  config.methods.clear();
  for (const auto& name : s.methods) config.methods.push_back(ParseMethod(name));
  config.delays = s.delays;
  config.episodes_per_cell = s.episodes;
  config.seed_base = s.seed_base;
  config.output_dir = s.out;
  config.guidance.sigma_d = s.sigma_d;
  config.guidance.rho = s.rho;
  config.guidance.n = s.steps;
  config.guidance.epsilon = s.epsilon;
  config.guidance.guide_at_tau_zero = s.guide_at_tau_zero;
  config.beta_override = s.beta;
  config.mask_decay = s.mask_decay;
  config.replan_override = s.replan;
  config.grid_delay = s.grid_delay;
  config.max_overrun_fraction = s.max_overrun_fraction;
  config.threads = s.threads;

  config.variants.clear();
  for (const auto& id : s.variants) {
    BenchVariant v;
    if (id == "unimodal") {
      v = UnimodalVariant();
      v.weight = s.unimodal_weight;
    } else if (id == "bimodal") {
      v = BimodalVariant();
      v.weight = s.bimodal_weight;
    } else {
      throw StructuralError("unknown variant '" + id + "'");
    }
    ApplyVariantSettings(s, v);
    config.variants.push_back(std::move(v));
  }
  ValidateExperimentConfig(config);
  return config;
}

int OverrunExit(int overruns, int episodes, double max_fraction) {
  if (episodes == 0) return kExitOk;
  const double fraction = static_cast<double>(overruns) / episodes;
  if (fraction > max_fraction) {
    std::fprintf(stderr,
                 "error: %d of %d episodes overran the schedule (%.3f > "
                 "%.3f)\n",
                 overruns, episodes, fraction, max_fraction);
    return kExitOverrun;
  }
  return kExitOk;
}

void PrintSummary(const nlohmann::json& summary) {
  std::printf("%-6s %8s %8s %8s %8s %8s %8s\n", "method", "success", "steps",
              "l2_m", "l2_M", "acc", "jerk");
  auto value = [](const nlohmann::json& m, const char* key) {
    return m.at(key).is_number() ? m.at(key).get<double>()
                                 : std::numeric_limits<double>::quiet_NaN();
  };
  if (summary.contains("methods")) {
    for (const auto& [name, m] : summary["methods"].items()) {
      std::printf("%-6s %8.3f %8.2f %8.3f %8.3f %8.3f %8.3f\n", name.c_str(),
                  value(m, "success"), value(m, "env_steps"),
                  value(m, "l2_mean"), value(m, "l2_max"),
                  value(m, "max_acc"), value(m, "max_jerk"));
    }
  }
  if (summary.contains("vs_rtc")) {
    for (const auto& [name, m] : summary["vs_rtc"].items()) {
      std::printf("%-6s %7.1f%% %7.1f%% %7.1f%% %7.1f%% %7.1f%% %7.1f%%  "
                  "(vs rtc)\n",
                  name.c_str(), value(m, "success"), value(m, "env_steps"),
                  value(m, "l2_mean"), value(m, "l2_max"),
                  value(m, "max_acc"), value(m, "max_jerk"));
    }
  }
  for (const auto& w : summary.value("warnings", nlohmann::json::array())) {
    std::fprintf(stderr, "warning: %s\n", w.get<std::string>().c_str());
  }
}

int RunSweepCommand(const ExperimentConfig& config) {
  PrepareOutputDir(config.output_dir);
  const SweepResult result = RunSweep(config);
  const nlohmann::json summary = SaveSweep(config, result);
  PrintSummary(summary);
  std::printf("wrote %s\n", (config.output_dir / "rows.csv").c_str());
  return OverrunExit(result.schedule_overruns,
                     static_cast<int>(result.rows.size()),
                     config.max_overrun_fraction);
}

int RunGridCommand(const ExperimentConfig& config,
                   const std::vector<double>& grid_arg, bool sigma) {
  PrepareOutputDir(config.output_dir);
  const std::vector<double>& grid =
      grid_arg.empty() ? (sigma ? kSigmaGrid : kRhoGrid) : grid_arg;
  std::vector<ResultRow> rows;
  const std::vector<GridRow> table = sigma
                                         ? GridSearchSigma(config, grid, &rows)
                                         : GridSearchRho(config, grid, &rows);
  const std::string stem = sigma ? "grid_sigma" : "grid_rho";
  const auto column = sigma ? kSigmaGridColumn : kRhoGridColumn;
  {
    std::ofstream out(config.output_dir / (stem + ".csv"));
    WriteGridTable(out, column, table);
    if (!out) throw IoError("failed writing " + stem + ".csv");
  }
  {
    std::ofstream out(config.output_dir / (stem + "_rows.csv"));
    WriteRowsCsv(out, rows);
    if (!out) throw IoError("failed writing " + stem + "_rows.csv");
  }
  WriteGridTable(std::cout, column, table);
  int overruns = 0;
  for (const auto& r : table) overruns += r.schedule_overruns;
  return OverrunExit(overruns, static_cast<int>(rows.size()),
                     config.max_overrun_fraction);
}

int RunSummarizeCommand(const ExperimentConfig& config,
                        const std::string& rows_arg) {
  const std::filesystem::path path =
      rows_arg.empty() ? config.output_dir / "rows.csv"
                       : std::filesystem::path(rows_arg);
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  const std::vector<ResultRow> rows = ReadRowsCsv(in);
  if (rows.empty()) throw IoError(path.string() + " has no rows");
  const nlohmann::json summary = EmitSummary(rows, SuiteWeights(config));
  std::cout << summary.dump(2) << '\n';
  return kExitOk;
}

int RunVerifyCommand(const Settings& s) {
  VerifyOptions options;
  options.seed = s.verify_seed;
  options.benchmark_episodes = s.verify_episodes;
  options.monte_carlo_samples = s.verify_samples;
  options.threads = s.threads;
  const auto results = RunAcceptanceSuite(options, [](const CheckResult& r) {
    std::printf("%s\n", FormatCheck(r).c_str());
    std::fflush(stdout);
  });
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::printf("%d/%zu checks passed\n",
              static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chunked flow-policy execution under inference delay"};
  app.set_config("--config", "", "Key = value configuration file");
  app.require_subcommand(1);
  Settings s;
  AddOptions(app, s);

  // Options live on the main app so a config file sets them regardless of
  // the subcommand; fallthrough lets them follow the subcommand on the line.
  auto* sweep = app.add_subcommand("sweep", "Delay sweep over all cells");
  auto* grid_sigma =
      app.add_subcommand("grid-sigma", "PC over a sigma_d grid at one delay");
  auto* grid_rho =
      app.add_subcommand("grid-rho", "POTR over a rho grid at one delay");
  auto* summarize =
      app.add_subcommand("summarize", "Summary JSON from a row file");
  auto* verify = app.add_subcommand("verify", "Run the verification suite");
  for (auto* sub : {sweep, grid_sigma, grid_rho, summarize, verify}) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*verify) return RunVerifyCommand(s);
    const ExperimentConfig config = BuildConfig(s);
    if (*sweep) return RunSweepCommand(config);
    if (*grid_sigma) return RunGridCommand(config, s.grid, true);
    if (*grid_rho) return RunGridCommand(config, s.grid, false);
    if (*summarize) return RunSummarizeCommand(config, s.rows);
  } catch (const StructuralError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitConfig;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}
