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

#include "chunkflow/guidance.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "chunkflow/errors.h"

namespace chunkflow {
namespace {

void CheckOpenUnit(double tau, const char* what) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw DomainError(std::string(what) + ": tau must be in (0, 1), got " +
                      std::to_string(tau));
  }
}

// Re-throws an error from inside the solver loop with the step attached.
[[noreturn]] void RethrowAtStep(int step) {
  const std::string where = " [denoising step " + std::to_string(step) + "]";
  try {
    throw;
  } catch (const NumericError& e) {
    throw NumericError(e.what(), step, e.coordinate());
  } catch (const DomainError& e) {
    throw DomainError(e.what() + where);
  } catch (const StructuralError& e) {
    throw StructuralError(e.what() + where);
  }
}

}  // namespace

std::string_view MethodName(GuidanceMethod method) {
  switch (method) {
    case GuidanceMethod::kNaive:
      return "naive";
    case GuidanceMethod::kRtc:
      return "rtc";
    case GuidanceMethod::kPc:
      return "pc";
    case GuidanceMethod::kPotr:
      return "potr";
  }
  return "unknown";
}

GuidanceMethod ParseMethod(std::string_view name) {
  if (name == "naive") return GuidanceMethod::kNaive;
  if (name == "rtc") return GuidanceMethod::kRtc;
  if (name == "pc") return GuidanceMethod::kPc;
  if (name == "potr") return GuidanceMethod::kPotr;
  throw StructuralError("unknown guidance method '" + std::string(name) + "'");
}

void ValidateGuidanceConfig(const GuidanceConfig& config) {
  if (!(config.sigma_d > 0.0)) throw StructuralError("sigma_d must be > 0");
  if (!(config.beta > 0.0)) throw StructuralError("beta must be > 0");
  if (!(config.rho > 0.0)) throw StructuralError("rho must be > 0");
  if (config.n < 1) throw StructuralError("n must be >= 1");
  if (!(config.epsilon > 0.0 && config.epsilon <= 1e-6)) {
    throw StructuralError("epsilon must be in (0, 1e-6]");
  }
}

void ValidateInpaintSpec(const InpaintSpec& spec, Eigen::Index horizon,
                         Eigen::Index action_dim) {
  if (spec.target.rows() != horizon || spec.target.cols() != action_dim) {
    throw StructuralError("inpaint target shape does not match the chunk");
  }
  if (spec.mask.size() != horizon) {
    throw StructuralError("soft mask length does not match the horizon");
  }
  for (Eigen::Index i = 0; i < spec.mask.size(); ++i) {
    if (!(spec.mask(i) >= 0.0 && spec.mask(i) <= 1.0)) {
      throw StructuralError("soft mask entry " + std::to_string(i) +
                            " outside [0, 1]");
    }
  }
}

double RtcWeight(double tau, double beta) {
  CheckOpenUnit(tau, "RtcWeight");
  const double one_minus = 1.0 - tau;
  return std::min((tau * tau + one_minus * one_minus) / (tau * one_minus),
                  beta);
}

double RTauSq(double tau, double sigma_d) {
  CheckOpenUnit(tau, "RTauSq");
  const double one_minus = 1.0 - tau;
  const double s2 = sigma_d * sigma_d;
  return one_minus * one_minus * s2 /
         (one_minus * one_minus + s2 * tau * tau);
}

double PcWeight(double tau, double sigma_d, double beta) {
  CheckOpenUnit(tau, "PcWeight");
  const double one_minus = 1.0 - tau;
  const double s2 = sigma_d * sigma_d;
  return std::min(
      (one_minus * one_minus + s2 * tau * tau) / (s2 * tau * one_minus), beta);
}

double GuidanceWeight(const GuidanceConfig& config, double tau) {
  switch (config.method) {
    case GuidanceMethod::kNaive:
      return 0.0;
    case GuidanceMethod::kRtc:
      return RtcWeight(tau, config.beta);
    case GuidanceMethod::kPc:
    case GuidanceMethod::kPotr:
      return PcWeight(tau, config.sigma_d, config.beta);
  }
  return 0.0;
}

ActionChunk PseudoinverseCorrection(const ActionChunk& chunk, double tau,
                                    const ActionChunk& velocity,
                                    const InpaintSpec& spec,
                                    const VelocityField& field,
                                    const Observation& obs) {
  ValidateInpaintSpec(spec, chunk.rows(), chunk.cols());
  const ActionChunk estimate = OneStepEstimate(chunk, velocity, tau);
  const ActionChunk weighted_residual =
      spec.mask.asDiagonal() * (spec.target - estimate);
  return EstimateVjp(field, chunk, tau, obs, weighted_residual);
}

ActionChunk OtrProject(const ActionChunk& g_pc, const ActionChunk& velocity,
                       double rho, double epsilon) {
  if (g_pc.rows() != velocity.rows() || g_pc.cols() != velocity.cols()) {
    throw StructuralError("OtrProject: shape mismatch");
  }
  if (std::isinf(rho)) return g_pc;

  const double v_norm = velocity.norm();
  const double radius = rho * v_norm;
  if (v_norm < epsilon) {
    const double scale = std::min(radius / (g_pc.norm() + epsilon), 1.0);
    return scale * g_pc;
  }
  const double coeff = (g_pc.array() * velocity.array()).sum() /
                       (v_norm * v_norm);
  const ActionChunk parallel = coeff * velocity;
  const ActionChunk perpendicular = g_pc - parallel;
  const double perp_norm = perpendicular.norm();
  // Inside the trust region: returned untouched so the map is idempotent.
  if (perp_norm <= radius) return g_pc;
  return parallel + (radius / (perp_norm + epsilon)) * perpendicular;
}

ActionChunk GuidedDenoise(const ActionChunk& initial_noise,
                          const Observation& obs, const VelocityField& field,
                          const std::optional<InpaintSpec>& spec,
                          const GuidanceConfig& config) {
  ValidateGuidanceConfig(config);
  const bool guided = config.method != GuidanceMethod::kNaive;
  if (guided) {
    if (!spec) throw StructuralError("guided denoising requires an InpaintSpec");
    ValidateInpaintSpec(*spec, initial_noise.rows(), initial_noise.cols());
  }

  FlowState state{initial_noise, 0.0, 0};
  for (int k = 0; k < config.n; ++k) {
    try {
      const double tau = state.tau;
      const ActionChunk velocity = field.Evaluate(state.chunk, tau, obs);
      if (!guided || (k == 0 && !config.guide_at_tau_zero)) {
        state = EulerStep(state, velocity, config.n);
        continue;
      }
      const ActionChunk g =
          PseudoinverseCorrection(state.chunk, tau, velocity, *spec, field, obs);
      const double w = k == 0 ? config.beta : GuidanceWeight(config, tau);
      const ActionChunk g_pc = w * g;
      const ActionChunk g_final =
          config.method == GuidanceMethod::kPotr
              ? OtrProject(g_pc, velocity, config.rho, config.epsilon)
              : g_pc;
      state = EulerStep(state, velocity + g_final, config.n);
    } catch (...) {
      RethrowAtStep(k);
    }
  }
  return state.chunk;
}

}  // namespace chunkflow
