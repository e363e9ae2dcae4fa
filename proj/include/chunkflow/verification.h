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

// Acceptance checks and the independent oracles they rely on. Shared by the
// acceptance test binary and the `verify` subcommand.

#ifndef CHUNKFLOW_VERIFICATION_H_
#define CHUNKFLOW_VERIFICATION_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "chunkflow/gaussian_mixture.h"
#include "chunkflow/types.h"

namespace chunkflow {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  uint64_t seed = 20261017;
  // Paired seeds per (method, delay, variant) cell for the benchmark check.
  int benchmark_episodes = 200;
  // Episodes per cell for the grid-search schema check.
  int grid_episodes = 10;
  // Importance samples per velocity probe.
  int monte_carlo_samples = 250000;
  int threads = 0;
};

// Self-normalized importance-sampling estimate of E[A^1 - eps | A^tau = x]
// for the Gaussian-mixture prior, drawing A^1 from the prior itself. Does
// not touch the closed-form velocity.
struct MonteCarloVelocity {
  ActionChunk mean;
  ActionChunk standard_error;
  double effective_samples = 0.0;
};
MonteCarloVelocity ImportanceSampledVelocity(
    const GaussianMixtureFieldParams& params, const ActionChunk& x, double tau,
    int samples, uint64_t seed);

// Exact endpoint of the flow ODE for a single Gaussian (mu, s): mu + s * x0.
ActionChunk GaussianFlowEndpoint(const ActionChunk& mean, double scale,
                                 const ActionChunk& x0);

// Classic RK4 on the single-Gaussian flow ODE with its own closed-form
// velocity, integrated over [0, 1] in `steps` steps.
ActionChunk Rk4GaussianFlow(const ActionChunk& mean, double scale,
                            const ActionChunk& x0, int steps);

// Least-squares slope of log(y) against log(x).
double LogLogSlope(const std::vector<double>& x, const std::vector<double>& y);

CheckResult CheckWeightTable();
CheckResult CheckSigmaOneReduction();
CheckResult CheckOtrProperties(uint64_t seed);
CheckResult CheckVjpAgreement(uint64_t seed);
CheckResult CheckEulerConvergence(uint64_t seed);
CheckResult CheckVelocityOracle(const VerifyOptions& options);
CheckResult CheckAggregationCrossCheck();
CheckResult CheckBenchmarkTrends(const VerifyOptions& options);
CheckResult CheckEquivalenceDegenerations(const VerifyOptions& options);
CheckResult CheckGridHarness(const VerifyOptions& options);

// Runs all ten checks in order. `on_result` (optional) sees each result as
// soon as it is available.
std::vector<CheckResult> RunAcceptanceSuite(
    const VerifyOptions& options,
    const std::function<void(const CheckResult&)>& on_result = {});

// "PASS [n] name: detail" / "FAIL [n] name: detail".
std::string FormatCheck(const CheckResult& result);

}  // namespace chunkflow

#endif  // CHUNKFLOW_VERIFICATION_H_
