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

#include "chunkflow/gaussian_mixture.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "chunkflow/errors.h"

namespace chunkflow {
namespace {

void CheckTau(double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) {
    throw DomainError("Gaussian-mixture velocity needs tau in [0, 1), got " +
                      std::to_string(tau));
  }
}

// Quantities for one component at (x, tau), expressed in the original basis.
struct ComponentTerms {
  double log_joint = 0.0;  // log w_c + log N_c(x), up to a shared constant
  ActionChunk velocity;    // E[A^1 - eps | x, c]
  ActionChunk score;       // grad_x log N_c(x)
  Vector slope;            // per-eigenrow velocity slope kappa_k
};

ComponentTerms ComputeTerms(const MixtureComponent& component,
                            const RowCorrelation& correlation,
                            const ActionChunk& x, double tau) {
  const double s2 = component.scale * component.scale;
  const double one_minus = 1.0 - tau;
  const ActionChunk centered =
      correlation.ToEigen(x - tau * component.mean);
  const Vector& lambda = correlation.eigenvalues();

  ComponentTerms terms;
  terms.slope.resize(lambda.size());
  ActionChunk scaled_velocity(centered.rows(), centered.cols());
  ActionChunk whitened(centered.rows(), centered.cols());
  double quad = 0.0;
  double log_det = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    const double prior_var = s2 * lambda(k);
    const double marginal_var = tau * tau * prior_var + one_minus * one_minus;
    terms.slope(k) = (tau * prior_var - one_minus) / marginal_var;
    scaled_velocity.row(k) = terms.slope(k) * centered.row(k);
    whitened.row(k) = centered.row(k) / marginal_var;
    quad += centered.row(k).squaredNorm() / marginal_var;
    log_det += static_cast<double>(centered.cols()) * std::log(marginal_var);
  }
  terms.log_joint = std::log(component.weight) - 0.5 * (quad + log_det);
  terms.velocity = component.mean + correlation.FromEigen(scaled_velocity);
  terms.score = -correlation.FromEigen(whitened);
  return terms;
}

// Softmax of log_joint with max-subtraction.
Vector ResponsibilitiesOf(const std::vector<ComponentTerms>& terms) {
  Vector r(static_cast<Eigen::Index>(terms.size()));
  double max_log = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) max_log = std::max(max_log, t.log_joint);
  for (size_t c = 0; c < terms.size(); ++c) {
    r(static_cast<Eigen::Index>(c)) = std::exp(terms[c].log_joint - max_log);
  }
  return r / r.sum();
}

std::vector<ComponentTerms> AllTerms(const GaussianMixtureFieldParams& params,
                                     const RowCorrelation& correlation,
                                     const ActionChunk& x, double tau) {
  const ActionChunk& ref = params.components.front().mean;
  if (x.rows() != ref.rows() || x.cols() != ref.cols()) {
    throw StructuralError("GaussianMixtureField: chunk shape does not match "
                          "component means");
  }
  std::vector<ComponentTerms> terms;
  terms.reserve(params.components.size());
  for (const auto& component : params.components) {
    terms.push_back(ComputeTerms(component, correlation, x, tau));
  }
  return terms;
}

}  // namespace

void ValidateMixtureParams(const GaussianMixtureFieldParams& params) {
  if (params.components.empty()) {
    throw StructuralError("Gaussian mixture has no components");
  }
  const auto& ref = params.components.front().mean;
  if (ref.rows() < 1 || ref.cols() < 1) {
    throw StructuralError("Gaussian mixture means must be non-empty");
  }
  double total = 0.0;
  for (const auto& c : params.components) {
    if (c.mean.rows() != ref.rows() || c.mean.cols() != ref.cols()) {
      throw StructuralError("Gaussian mixture means differ in shape");
    }
    if (!(c.weight > 0.0 && c.weight <= 1.0)) {
      throw StructuralError("mixture weight outside (0, 1]");
    }
    if (!(c.scale > 0.0) || !std::isfinite(c.scale)) {
      throw StructuralError("mixture scale must be positive and finite");
    }
    if (!c.mean.allFinite()) {
      throw StructuralError("mixture mean has non-finite entries");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw StructuralError("mixture weights sum to " + std::to_string(total));
  }
  if (!(params.correlation_length >= 0.0)) {
    throw StructuralError("correlation_length must be >= 0");
  }
}

RowCorrelation RowCorrelation::Isotropic(int horizon) {
  if (horizon < 1) throw StructuralError("horizon must be >= 1");
  RowCorrelation c;
  c.basis_ = Eigen::MatrixXd::Identity(horizon, horizon);
  c.eigenvalues_ = Vector::Ones(horizon);
  c.isotropic_ = true;
  return c;
}

RowCorrelation RowCorrelation::SquaredExponential(int horizon, double length,
                                                  double white_fraction,
                                                  bool center_rows) {
  if (horizon < 1) throw StructuralError("horizon must be >= 1");
  if (length <= 0.0) return Isotropic(horizon);
  if (!(white_fraction > 0.0 && white_fraction <= 1.0)) {
    throw StructuralError("white_fraction must be in (0, 1]");
  }
  Eigen::MatrixXd sigma(horizon, horizon);
  for (int i = 0; i < horizon; ++i) {
    for (int j = 0; j < horizon; ++j) {
      const double d = static_cast<double>(i - j);
      sigma(i, j) =
          (1.0 - white_fraction) * std::exp(-d * d / (2.0 * length * length)) +
          (i == j ? white_fraction : 0.0);
    }
  }
  if (center_rows) {
    // Project the smooth part off the all-ones row vector, then rescale so
    // the mean per-row variance stays 1.
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(horizon, horizon);
    const Eigen::MatrixXd proj =
        eye - Eigen::MatrixXd::Constant(horizon, horizon, 1.0 / horizon);
    const Eigen::MatrixXd smooth = sigma - white_fraction * eye;
    sigma = proj * smooth * proj + white_fraction * eye;
    sigma *= static_cast<double>(horizon) / sigma.trace();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sigma);
  RowCorrelation c;
  c.basis_ = solver.eigenvectors();
  c.eigenvalues_ = solver.eigenvalues();
  c.isotropic_ = false;
  return c;
}

RowCorrelation RowCorrelation::ForParams(
    const GaussianMixtureFieldParams& params) {
  ValidateMixtureParams(params);
  const int horizon = static_cast<int>(params.components.front().mean.rows());
  return SquaredExponential(horizon, params.correlation_length,
                            params.white_fraction, params.center_rows);
}

Eigen::MatrixXd RowCorrelation::Matrix() const {
  return basis_ * eigenvalues_.asDiagonal() * basis_.transpose();
}

ActionChunk RowCorrelation::ToEigen(const ActionChunk& m) const {
  if (isotropic_) return m;
  return basis_.transpose() * m;
}

ActionChunk RowCorrelation::FromEigen(const ActionChunk& m) const {
  if (isotropic_) return m;
  return basis_ * m;
}

GaussianMixtureField::GaussianMixtureField(GaussianMixtureFieldParams params)
    : params_(std::move(params)), correlation_(RowCorrelation::ForParams(params_)) {}

GaussianMixtureField::GaussianMixtureField(GaussianMixtureFieldParams params,
                                           RowCorrelation correlation)
    : params_(std::move(params)), correlation_(std::move(correlation)) {
  ValidateMixtureParams(params_);
  if (correlation_.horizon() != params_.components.front().mean.rows()) {
    throw StructuralError("row correlation horizon does not match means");
  }
}

ActionChunk GaussianMixtureField::Evaluate(const ActionChunk& chunk, double tau,
                                           const Observation&) const {
  CheckTau(tau);
  const auto terms = AllTerms(params_, correlation_, chunk, tau);
  if (terms.size() == 1) return terms.front().velocity;
  const Vector r = ResponsibilitiesOf(terms);
  ActionChunk v = ActionChunk::Zero(chunk.rows(), chunk.cols());
  for (size_t c = 0; c < terms.size(); ++c) {
    v += r(static_cast<Eigen::Index>(c)) * terms[c].velocity;
  }
  return v;
}

ActionChunk GaussianMixtureField::VelocityVjp(
    const ActionChunk& chunk, double tau, const Observation&,
    const ActionChunk& cotangent) const {
  CheckTau(tau);
  if (cotangent.rows() != chunk.rows() || cotangent.cols() != chunk.cols()) {
    throw StructuralError("VelocityVjp: cotangent shape mismatch");
  }
  const auto terms = AllTerms(params_, correlation_, chunk, tau);
  const ActionChunk u_eigen = correlation_.ToEigen(cotangent);
  auto component_jacobian_term = [&](const ComponentTerms& t) {
    // M_c u with M_c = Q diag(kappa_c) Q^T (symmetric).
    return correlation_.FromEigen(t.slope.asDiagonal() * u_eigen);
  };
  if (terms.size() == 1) return component_jacobian_term(terms.front());

  // d/dx sum_c r_c v_c = sum_c r_c M_c + sum_c r_c v_c (score_c - mean_score)^T
  const Vector r = ResponsibilitiesOf(terms);
  ActionChunk mean_score = ActionChunk::Zero(chunk.rows(), chunk.cols());
  for (size_t c = 0; c < terms.size(); ++c) {
    mean_score += r(static_cast<Eigen::Index>(c)) * terms[c].score;
  }
  ActionChunk result = ActionChunk::Zero(chunk.rows(), chunk.cols());
  for (size_t c = 0; c < terms.size(); ++c) {
    const double rc = r(static_cast<Eigen::Index>(c));
    const double u_dot_v = (cotangent.array() * terms[c].velocity.array()).sum();
    result += rc * component_jacobian_term(terms[c]) +
              rc * u_dot_v * (terms[c].score - mean_score);
  }
  return result;
}

Vector GaussianMixtureField::Responsibilities(const ActionChunk& chunk,
                                              double tau) const {
  CheckTau(tau);
  return ResponsibilitiesOf(AllTerms(params_, correlation_, chunk, tau));
}

ActionChunk GmVelocity(const ActionChunk& chunk, double tau,
                       const GaussianMixtureFieldParams& params) {
  CheckTau(tau);
  return GaussianMixtureField(params).Evaluate(chunk, tau, Observation{});
}

double GaussianVelocitySlope(double tau, double scale) {
  const double s2 = scale * scale;
  const double one_minus = 1.0 - tau;
  return (tau * s2 - one_minus) / (tau * tau * s2 + one_minus * one_minus);
}

}  // namespace chunkflow
