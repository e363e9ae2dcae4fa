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

#ifndef CHUNKFLOW_GUIDANCE_H_
#define CHUNKFLOW_GUIDANCE_H_

#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "chunkflow/flow.h"
#include "chunkflow/types.h"

namespace chunkflow {

enum class GuidanceMethod {
  kNaive,  // unguided Euler integration
  kRtc,    // RTC weight, unconstrained direction
  kPc,     // prior-corrected weight, unconstrained direction
  kPotr,   // prior-corrected weight + orthogonal trust region
};

std::string_view MethodName(GuidanceMethod method);
// Accepts the lowercase names "naive", "rtc", "pc", "potr".
GuidanceMethod ParseMethod(std::string_view name);

inline constexpr double kUnboundedRadius =
    std::numeric_limits<double>::infinity();

struct GuidanceConfig {
  GuidanceMethod method = GuidanceMethod::kPotr;
  double sigma_d = 0.4;
  double rho = 0.5;  // kUnboundedRadius disables the trust region
  double beta = 10.0;
  int n = 10;
  double epsilon = 1e-8;
  // The weights diverge at tau = 0. When false the k = 0 step is unguided;
  // when true it is guided with the clipped weight beta.
  bool guide_at_tau_zero = false;
};

// Throws StructuralError unless sigma_d > 0, beta > 0, rho > 0, n >= 1 and
// 0 < epsilon <= 1e-6.
void ValidateGuidanceConfig(const GuidanceConfig& config);

// Inpainting target Y (H x D) and soft mask W (length H, entries in [0, 1]).
struct InpaintSpec {
  ActionChunk target;
  Vector mask;
};

void ValidateInpaintSpec(const InpaintSpec& spec, Eigen::Index horizon,
                         Eigen::Index action_dim);

// min((tau^2 + (1 - tau)^2) / (tau (1 - tau)), beta). Pass beta = +inf for
// the unclipped schedule. Throws DomainError unless 0 < tau < 1.
double RtcWeight(double tau, double beta);

// (1 - tau)^2 sigma_d^2 / ((1 - tau)^2 + sigma_d^2 tau^2).
double RTauSq(double tau, double sigma_d);

// min(((1 - tau)^2 + sigma_d^2 tau^2) / (sigma_d^2 tau (1 - tau)), beta).
double PcWeight(double tau, double sigma_d, double beta);

// Weight used by `config.method` at 0 < tau < 1 (0 for kNaive).
double GuidanceWeight(const GuidanceConfig& config, double tau);

// Unweighted correction g = (Y - A_hat)^T diag(W) dA_hat/dA^tau, where
// A_hat = A^tau + (1 - tau) * velocity.
ActionChunk PseudoinverseCorrection(const ActionChunk& chunk, double tau,
                                    const ActionChunk& velocity,
                                    const InpaintSpec& spec,
                                    const VelocityField& field,
                                    const Observation& obs);

// Keeps the component of g_pc along `velocity` and clips the orthogonal
// remainder to radius rho * |velocity| (flattened Frobenius geometry).
// When |velocity| < epsilon the whole of g_pc is capped at that radius.
ActionChunk OtrProject(const ActionChunk& g_pc, const ActionChunk& velocity,
                       double rho, double epsilon);

// Runs n Euler steps from `initial_noise`, guided per `config.method`.
// `spec` is required unless the method is kNaive.
ActionChunk GuidedDenoise(const ActionChunk& initial_noise,
                          const Observation& obs, const VelocityField& field,
                          const std::optional<InpaintSpec>& spec,
                          const GuidanceConfig& config);

}  // namespace chunkflow

#endif  // CHUNKFLOW_GUIDANCE_H_
