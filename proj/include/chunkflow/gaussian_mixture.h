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

#ifndef CHUNKFLOW_GAUSSIAN_MIXTURE_H_
#define CHUNKFLOW_GAUSSIAN_MIXTURE_H_

#include <vector>

#include "chunkflow/flow.h"
#include "chunkflow/types.h"

namespace chunkflow {

struct MixtureComponent {
  double weight = 1.0;
  ActionChunk mean;
  // Per-entry standard deviation of the component.
  double scale = 1.0;
};

// Prior p(A^1) = sum_c w_c N(mean_c, scale_c^2 * Sigma (x) I_D), where Sigma
// is a unit-diagonal correlation over chunk rows shared by all components.
struct GaussianMixtureFieldParams {
  std::vector<MixtureComponent> components;
  // Squared-exponential correlation length over rows, in control ticks.
  // 0 selects Sigma = I (independent entries).
  double correlation_length = 0.0;
  // Share of each row's variance that is independent across rows, in
  // (0, 1]. Ignored when correlation_length is 0.
  double white_fraction = 1e-3;
  // Removes the per-chunk row mean from the smooth part, so sampled
  // deviations reshape a chunk without shifting its net displacement.
  bool center_rows = false;
};

// Throws StructuralError for an empty mixture, mismatched mean shapes,
// weights not summing to 1 within 1e-12, or non-positive scales.
void ValidateMixtureParams(const GaussianMixtureFieldParams& params);

// Eigendecomposition Sigma = Q diag(lambda) Q^T of the row correlation.
class RowCorrelation {
 public:
  static RowCorrelation Isotropic(int horizon);
  // (1 - white) * exp(-(i - j)^2 / (2 l^2)) + white * [i == j]. With
  // `center_rows` the first term is sandwiched by I - 11^T / H and the
  // result rescaled to unit mean diagonal.
  static RowCorrelation SquaredExponential(int horizon, double length,
                                           double white_fraction,
                                           bool center_rows = false);
  static RowCorrelation ForParams(const GaussianMixtureFieldParams& params);

  int horizon() const { return static_cast<int>(eigenvalues_.size()); }
  bool isotropic() const { return isotropic_; }
  const Eigen::MatrixXd& basis() const { return basis_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  Eigen::MatrixXd Matrix() const;

  // Q^T m and Q m; identity copies when isotropic.
  ActionChunk ToEigen(const ActionChunk& m) const;
  ActionChunk FromEigen(const ActionChunk& m) const;

 private:
  Eigen::MatrixXd basis_;
  Vector eigenvalues_;
  bool isotropic_ = true;
};

// Exact marginal velocity E[A^1 - eps | A^tau] of a Gaussian-mixture prior,
// with its analytic vector-Jacobian product. Ignores the observation; the
// prior is assumed already conditioned.
class GaussianMixtureField : public VelocityField {
 public:
  explicit GaussianMixtureField(GaussianMixtureFieldParams params);
  GaussianMixtureField(GaussianMixtureFieldParams params,
                       RowCorrelation correlation);

  ActionChunk Evaluate(const ActionChunk& chunk, double tau,
                       const Observation& obs) const override;
  bool HasAnalyticJacobian() const override { return true; }
  ActionChunk VelocityVjp(const ActionChunk& chunk, double tau,
                          const Observation& obs,
                          const ActionChunk& cotangent) const override;

  // Posterior component probabilities given A^tau.
  Vector Responsibilities(const ActionChunk& chunk, double tau) const;

  const GaussianMixtureFieldParams& params() const { return params_; }
  const RowCorrelation& correlation() const { return correlation_; }

 private:
  GaussianMixtureFieldParams params_;
  RowCorrelation correlation_;
};

// One-shot evaluation; builds the field for `params` and evaluates it.
ActionChunk GmVelocity(const ActionChunk& chunk, double tau,
                       const GaussianMixtureFieldParams& params);

// Single isotropic Gaussian (mean, scale): scalar slope of the velocity,
// (tau s^2 - (1 - tau)) / (tau^2 s^2 + (1 - tau)^2).
double GaussianVelocitySlope(double tau, double scale);

}  // namespace chunkflow

#endif  // CHUNKFLOW_GAUSSIAN_MIXTURE_H_
