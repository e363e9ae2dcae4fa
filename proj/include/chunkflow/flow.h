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

#ifndef CHUNKFLOW_FLOW_H_
#define CHUNKFLOW_FLOW_H_

#include "chunkflow/types.h"

namespace chunkflow {

// Noisy chunk A^tau along the linear path x_tau = tau * A^1 + (1 - tau) * eps.
// States produced by EulerStep satisfy tau == step_index / n exactly.
struct FlowState {
  ActionChunk chunk;
  double tau = 0.0;
  int step_index = 0;
};

// Conditional velocity v(A^tau, tau, o).
class VelocityField {
 public:
  virtual ~VelocityField() = default;

  virtual ActionChunk Evaluate(const ActionChunk& chunk, double tau,
                               const Observation& obs) const = 0;

  virtual bool HasAnalyticJacobian() const { return false; }

  // Returns u^T dv/dA evaluated at (chunk, tau, obs). Only meaningful when
  // HasAnalyticJacobian(); the default throws StructuralError.
  virtual ActionChunk VelocityVjp(const ActionChunk& chunk, double tau,
                                  const Observation& obs,
                                  const ActionChunk& cotangent) const;
};

// v(A, tau, o) = c for a fixed matrix c. Jacobian is zero.
class ConstantVelocityField : public VelocityField {
 public:
  explicit ConstantVelocityField(ActionChunk velocity)
      : velocity_(std::move(velocity)) {}

  ActionChunk Evaluate(const ActionChunk& chunk, double tau,
                       const Observation& obs) const override;
  bool HasAnalyticJacobian() const override { return true; }
  ActionChunk VelocityVjp(const ActionChunk& chunk, double tau,
                          const Observation& obs,
                          const ActionChunk& cotangent) const override;

 private:
  ActionChunk velocity_;
};

// A^{tau + 1/n} = A^tau + velocity / n.
FlowState EulerStep(const FlowState& state, const ActionChunk& velocity, int n);

// Clean estimate A^tau + (1 - tau) * velocity.
ActionChunk OneStepEstimate(const ActionChunk& chunk,
                            const ActionChunk& velocity, double tau);

// Central-difference step used when a field has no analytic Jacobian.
inline constexpr double kFiniteDifferenceStep = 1e-5;

// Pulls `cotangent` back through the one-step clean estimate:
// u^T (I + (1 - tau) dv/dA). Uses the field's analytic VJP when available,
// central differences with step `fd_step` otherwise.
ActionChunk EstimateVjp(const VelocityField& field, const ActionChunk& chunk,
                        double tau, const Observation& obs,
                        const ActionChunk& cotangent,
                        double fd_step = kFiniteDifferenceStep);

// u^T dv/dA by central differences, regardless of HasAnalyticJacobian().
ActionChunk FiniteDifferenceVelocityVjp(const VelocityField& field,
                                        const ActionChunk& chunk, double tau,
                                        const Observation& obs,
                                        const ActionChunk& cotangent,
                                        double fd_step = kFiniteDifferenceStep);

}  // namespace chunkflow

#endif  // CHUNKFLOW_FLOW_H_
