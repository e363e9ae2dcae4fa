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

#ifndef CHUNKFLOW_BENCH_ENV_H_
#define CHUNKFLOW_BENCH_ENV_H_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chunkflow/flow.h"
#include "chunkflow/gaussian_mixture.h"
#include "chunkflow/types.h"

namespace chunkflow {

struct PointMassConfig {
  Vector start = Vector::Zero(2);
  Vector goal = Vector::Unit(2, 0);
  std::optional<Obstacle> obstacle;
  int max_steps = 60;
  double goal_tolerance = 0.05;
  double action_noise_std = 0.02;
  double dynamics_gain = 0.1;
};

struct EnvStepResult {
  bool done = false;
  bool success = false;
  bool collided = false;
};

// position += dynamics_gain * action + N(0, action_noise_std^2 I).
// The episode succeeds once the position is within goal_tolerance of the
// goal and fails on entering the obstacle or reaching max_steps.
class PointMassEnv {
 public:
  PointMassEnv(PointMassConfig config, uint64_t noise_seed);

  Observation Observe() const;
  // Action entries are expected in [-1, 1]. Throws std::logic_error after
  // the episode is done.
  EnvStepResult Step(const Vector& action);

  const Vector& position() const { return position_; }
  int step_count() const { return step_count_; }
  bool done() const { return done_; }
  bool success() const { return success_; }
  const PointMassConfig& config() const { return config_; }

 private:
  PointMassConfig config_;
  Vector position_;
  int step_count_ = 0;
  bool done_ = false;
  bool success_ = false;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
};

struct OraclePolicyParams {
  double sigma_cond = 0.4;  // per-entry std of each mode
  int modes = 1;            // 1: straight reach, 2: skirt the obstacle
  int horizon = 10;
  double dynamics_gain = 0.1;
  // Fraction of the remaining distance the controller closes per tick.
  double controller_gain = 0.3;
  // Lateral clearance beyond the obstacle radius for the skirting modes.
  double skirt_margin = 0.12;
  // Row correlation of the chunk prior; see GaussianMixtureFieldParams.
  double correlation_length = 3.0;
  double white_fraction = 0.01;
  bool center_rows = true;
};

// Per-mode mean chunks: a proportional controller rolled out for H ticks
// from the observed position, entries clipped to [-1, 1]. With modes = 2 and
// an obstacle, mode m heads for a via point on side m of the obstacle until
// it has passed the obstacle's center, then for the goal. Without an
// obstacle both modes coincide with the straight reach.
std::vector<ActionChunk> ModeMeanChunks(const Observation& obs,
                                        const OraclePolicyParams& params);

// Equal-weight mixture over ModeMeanChunks with scale sigma_cond.
GaussianMixtureFieldParams ConditionalField(const Observation& obs,
                                            const OraclePolicyParams& params);

// Velocity field of the observation-conditioned prior.
class OraclePolicyField : public VelocityField {
 public:
  explicit OraclePolicyField(OraclePolicyParams params);

  ActionChunk Evaluate(const ActionChunk& chunk, double tau,
                       const Observation& obs) const override;
  bool HasAnalyticJacobian() const override { return true; }
  ActionChunk VelocityVjp(const ActionChunk& chunk, double tau,
                          const Observation& obs,
                          const ActionChunk& cotangent) const override;

  const OraclePolicyParams& params() const { return params_; }

 private:
  GaussianMixtureField FieldFor(const Observation& obs) const;

  OraclePolicyParams params_;
  RowCorrelation correlation_;
};

// A task family; plays the role of a suite in cross-suite aggregation.
struct BenchVariant {
  std::string id;
  PointMassConfig env;
  OraclePolicyParams policy;
  int weight = 1;  // N_s
};

BenchVariant UnimodalVariant();
BenchVariant BimodalVariant();
std::vector<BenchVariant> DefaultVariants();

}  // namespace chunkflow

#endif  // CHUNKFLOW_BENCH_ENV_H_
