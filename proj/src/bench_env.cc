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

#include "chunkflow/bench_env.h"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "chunkflow/errors.h"

namespace chunkflow {

PointMassEnv::PointMassEnv(PointMassConfig config, uint64_t noise_seed)
    : config_(std::move(config)), position_(config_.start), rng_(noise_seed) {
  if (config_.start.size() < 1 || config_.start.size() != config_.goal.size()) {
    throw StructuralError("start and goal must have the same dimension >= 1");
  }
  if (config_.obstacle && config_.obstacle->center.size() != config_.goal.size()) {
    throw StructuralError("obstacle center dimension mismatch");
  }
  if (config_.max_steps < 1 || !(config_.goal_tolerance > 0.0) ||
      !(config_.action_noise_std >= 0.0) || !(config_.dynamics_gain > 0.0)) {
    throw StructuralError("invalid point-mass configuration");
  }
}

Observation PointMassEnv::Observe() const {
  return Observation{position_, config_.goal, config_.obstacle};
}

EnvStepResult PointMassEnv::Step(const Vector& action) {
  if (done_) throw std::logic_error("PointMassEnv::Step after episode end");
  if (action.size() != position_.size()) {
    throw StructuralError("action dimension mismatch");
  }
  position_ += config_.dynamics_gain * action;
  if (config_.action_noise_std > 0.0) {
    for (Eigen::Index i = 0; i < position_.size(); ++i) {
      position_(i) += config_.action_noise_std * noise_(rng_);
    }
  }
  ++step_count_;

  EnvStepResult result;
  if (config_.obstacle && (position_ - config_.obstacle->center).norm() <
                              config_.obstacle->radius) {
    result.collided = true;
  } else if ((position_ - config_.goal).norm() <= config_.goal_tolerance) {
    result.success = true;
  }
  result.done = result.success || result.collided ||
                step_count_ >= config_.max_steps;
  done_ = result.done;
  success_ = result.success;
  return result;
}

std::vector<ActionChunk> ModeMeanChunks(const Observation& obs,
                                        const OraclePolicyParams& params) {
  const Eigen::Index dim = obs.position.size();
  if (dim < 1 || obs.goal.size() != dim) {
    throw StructuralError("observation position/goal dimension mismatch");
  }
  if (params.horizon < 1 || params.modes < 1 || params.modes > 2) {
    throw StructuralError("oracle policy needs H >= 1 and modes in {1, 2}");
  }
  const bool skirt = params.modes == 2 && obs.obstacle.has_value();
  if (skirt && dim != 2) {
    throw StructuralError("obstacle-skirting modes require a planar task");
  }

  Vector axis, normal;
  if (skirt) {
    axis = obs.goal - obs.obstacle->center;
    const double len = axis.norm();
    axis = len > 0.0 ? Vector(axis / len) : Vector(Vector::Unit(2, 0));
    normal.resize(2);
    normal << -axis(1), axis(0);
  }

  const double per_tick = params.controller_gain / params.dynamics_gain;
  std::vector<ActionChunk> means;
  for (int m = 0; m < params.modes; ++m) {
    const double side = m == 0 ? 1.0 : -1.0;
    ActionChunk chunk(params.horizon, dim);
    Vector p = obs.position;
    bool passed = !skirt;
    for (int j = 0; j < params.horizon; ++j) {
      Vector target = obs.goal;
      if (!passed) {
        const Obstacle& o = *obs.obstacle;
        if ((p - o.center).dot(axis) >= 0.0) {
          passed = true;
        } else {
          target = o.center + side * (o.radius + params.skirt_margin) * normal +
                   0.5 * o.radius * axis;
        }
      }
      const Vector a = (per_tick * (target - p)).cwiseMax(-1.0).cwiseMin(1.0);
      chunk.row(j) = a.transpose();
      p += params.dynamics_gain * a;
    }
    means.push_back(std::move(chunk));
  }
  return means;
}

GaussianMixtureFieldParams ConditionalField(const Observation& obs,
                                            const OraclePolicyParams& params) {
  GaussianMixtureFieldParams field;
  field.correlation_length = params.correlation_length;
  field.white_fraction = params.white_fraction;
  field.center_rows = params.center_rows;
  auto means = ModeMeanChunks(obs, params);
  const double weight = 1.0 / static_cast<double>(means.size());
  for (auto& mean : means) {
    field.components.push_back({weight, std::move(mean), params.sigma_cond});
  }
  return field;
}

OraclePolicyField::OraclePolicyField(OraclePolicyParams params)
    : params_(params),
      correlation_(RowCorrelation::SquaredExponential(
          params.horizon, params.correlation_length, params.white_fraction,
          params.center_rows)) {
  if (!(params_.sigma_cond > 0.0)) {
    throw StructuralError("sigma_cond must be > 0");
  }
}

GaussianMixtureField OraclePolicyField::FieldFor(const Observation& obs) const {
  return GaussianMixtureField(ConditionalField(obs, params_), correlation_);
}

ActionChunk OraclePolicyField::Evaluate(const ActionChunk& chunk, double tau,
                                        const Observation& obs) const {
  return FieldFor(obs).Evaluate(chunk, tau, obs);
}

ActionChunk OraclePolicyField::VelocityVjp(const ActionChunk& chunk,
                                           double tau, const Observation& obs,
                                           const ActionChunk& cotangent) const {
  return FieldFor(obs).VelocityVjp(chunk, tau, obs, cotangent);
}

BenchVariant UnimodalVariant() {
  BenchVariant v;
  v.id = "unimodal";
  v.env.start = Vector::Zero(2);
  v.env.goal = Vector::Unit(2, 0);
  v.policy.modes = 1;
  v.weight = 10;
  return v;
}

BenchVariant BimodalVariant() {
  BenchVariant v;
  v.id = "bimodal";
  v.env.start = Vector::Zero(2);
  v.env.goal = 1.2 * Vector::Unit(2, 0);
  v.env.obstacle = Obstacle{0.6 * Vector::Unit(2, 0), 0.15};
  v.policy.modes = 2;
  v.weight = 10;
  return v;
}

std::vector<BenchVariant> DefaultVariants() {
  return {UnimodalVariant(), BimodalVariant()};
}

}  // namespace chunkflow
