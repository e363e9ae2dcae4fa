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

#include "chunkflow/flow.h"

#include <cmath>
#include <string>

#include "chunkflow/errors.h"

namespace chunkflow {
namespace {

void CheckSameShape(const ActionChunk& a, const ActionChunk& b,
                    const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw StructuralError(std::string(what) + ": shape " +
                          std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " +
                          std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
  }
}

// Index of the first non-finite entry in column-major flattening, or -1.
int FirstNonFinite(const ActionChunk& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i])) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

ActionChunk VelocityField::VelocityVjp(const ActionChunk&, double,
                                       const Observation&,
                                       const ActionChunk&) const {
  throw StructuralError("velocity field has no analytic Jacobian");
}

ActionChunk ConstantVelocityField::Evaluate(const ActionChunk& chunk, double,
                                            const Observation&) const {
  CheckSameShape(chunk, velocity_, "ConstantVelocityField");
  return velocity_;
}

ActionChunk ConstantVelocityField::VelocityVjp(
    const ActionChunk& chunk, double, const Observation&,
    const ActionChunk& cotangent) const {
  CheckSameShape(chunk, cotangent, "ConstantVelocityField::VelocityVjp");
  return ActionChunk::Zero(chunk.rows(), chunk.cols());
}

FlowState EulerStep(const FlowState& state, const ActionChunk& velocity,
                    int n) {
  if (n < 1) throw StructuralError("EulerStep: n must be >= 1");
  if (state.step_index < 0 || state.step_index >= n) {
    throw StructuralError("EulerStep: step_index " +
                          std::to_string(state.step_index) +
                          " outside [0, n)");
  }
  CheckSameShape(state.chunk, velocity, "EulerStep");
  if (int bad = FirstNonFinite(velocity); bad >= 0) {
    throw NumericError("EulerStep: non-finite velocity", state.step_index,
                       bad);
  }
  FlowState next;
  next.chunk = state.chunk + velocity / static_cast<double>(n);
  next.step_index = state.step_index + 1;
  next.tau = static_cast<double>(next.step_index) / static_cast<double>(n);
  return next;
}

ActionChunk OneStepEstimate(const ActionChunk& chunk,
                            const ActionChunk& velocity, double tau) {
  CheckSameShape(chunk, velocity, "OneStepEstimate");
  return chunk + (1.0 - tau) * velocity;
}

ActionChunk FiniteDifferenceVelocityVjp(const VelocityField& field,
                                        const ActionChunk& chunk, double tau,
                                        const Observation& obs,
                                        const ActionChunk& cotangent,
                                        double fd_step) {
  CheckSameShape(chunk, cotangent, "FiniteDifferenceVelocityVjp");
  ActionChunk result(chunk.rows(), chunk.cols());
  ActionChunk probe = chunk;
  for (Eigen::Index j = 0; j < chunk.size(); ++j) {
    const double saved = probe.data()[j];
    probe.data()[j] = saved + fd_step;
    const ActionChunk plus = field.Evaluate(probe, tau, obs);
    probe.data()[j] = saved - fd_step;
    const ActionChunk minus = field.Evaluate(probe, tau, obs);
    probe.data()[j] = saved;
    // Column j of the Jacobian, contracted with u.
    result.data()[j] =
        (cotangent.array() * (plus - minus).array()).sum() / (2.0 * fd_step);
  }
  return result;
}

ActionChunk EstimateVjp(const VelocityField& field, const ActionChunk& chunk,
                        double tau, const Observation& obs,
                        const ActionChunk& cotangent, double fd_step) {
  CheckSameShape(chunk, cotangent, "EstimateVjp");
  const ActionChunk velocity_vjp =
      field.HasAnalyticJacobian()
          ? field.VelocityVjp(chunk, tau, obs, cotangent)
          : FiniteDifferenceVelocityVjp(field, chunk, tau, obs, cotangent,
                                        fd_step);
  ActionChunk result = cotangent + (1.0 - tau) * velocity_vjp;
  if (int bad = FirstNonFinite(result); bad >= 0) {
    throw NumericError("EstimateVjp: non-finite result", -1, bad);
  }
  return result;
}

}  // namespace chunkflow
