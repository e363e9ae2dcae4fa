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

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "chunkflow/errors.h"
#include "chunkflow/gaussian_mixture.h"
#include "chunkflow/guidance.h"
#include "chunkflow/random.h"

namespace chunkflow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ActionChunk Row(std::initializer_list<double> values) {
  ActionChunk m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index j = 0;
  for (double v : values) m(0, j++) = v;
  return m;
}

TEST(Weights, TabulatedValues) {
  // tau, rtc, pc at sigma_d = 0.4, beta = 10.
  const double table[5][3] = {{0.1, 9.11, 10.00},
                              {0.3, 2.76, 10.00},
                              {0.5, 2.00, 7.25},
                              {0.7, 2.76, 5.01},
                              {0.9, 9.11, 9.69}};
  for (const auto& row : table) {
    EXPECT_NEAR(RtcWeight(row[0], 10.0), row[1], 0.005) << row[0];
    EXPECT_NEAR(PcWeight(row[0], 0.4, 10.0), row[2], 0.005) << row[0];
  }
}

TEST(Weights, RtcMatchesSnrExpansion) {
  for (double tau = 0.01; tau < 1.0; tau += 0.01) {
    const double snr = tau * tau / ((1 - tau) * (1 - tau));
    EXPECT_NEAR(RtcWeight(tau, kInf), (1 - tau) * (1 + snr) / tau,
                1e-12 * RtcWeight(tau, kInf));
    const double r2 = (1 - tau) * (1 - tau) /
                      (tau * tau + (1 - tau) * (1 - tau));
    EXPECT_NEAR(RtcWeight(tau, kInf), (1 - tau) / (tau * r2), 1e-9);
  }
}

TEST(Weights, RTauSqExamples) {
  EXPECT_DOUBLE_EQ(RTauSq(0.5, 1.0), 0.5);
  EXPECT_NEAR(RTauSq(0.5, 0.4), 0.04 / 0.29, 1e-15);
  EXPECT_NEAR(RTauSq(1e-9, 0.4), 0.16, 1e-9);
  for (double tau = 0.05; tau < 1.0; tau += 0.05) {
    EXPECT_NEAR(RTauSq(tau, 1.0),
                (1 - tau) * (1 - tau) / (tau * tau + (1 - tau) * (1 - tau)),
                1e-15);
  }
}

TEST(Weights, PcReducesToRtcAtUnitScale) {
  EXPECT_DOUBLE_EQ(PcWeight(0.5, 1.0, 10.0), 2.0);
  for (double tau = 0.01; tau < 1.0; tau += 0.01) {
    EXPECT_NEAR(PcWeight(tau, 1.0, 10.0), RtcWeight(tau, 10.0), 1e-12);
  }
}

TEST(Weights, DominanceWithClosedFormGap) {
  for (double sigma : {0.1, 0.25, 0.4, 0.7, 0.99, 1.0}) {
    for (double tau = 0.02; tau < 1.0; tau += 0.02) {
      const double pc = PcWeight(tau, sigma, kInf);
      const double rtc = RtcWeight(tau, kInf);
      const double gap = (1 - tau) / tau * (1 / (sigma * sigma) - 1);
      EXPECT_GE(pc, rtc);
      EXPECT_NEAR(pc - rtc, gap, 1e-9 * pc);
      if (sigma < 1.0) {
        EXPECT_GT(pc, rtc);
      }
    }
  }
}

TEST(Weights, SymmetryOnlyForRtc) {
  for (int i = 1; i < 10; ++i) {
    const double tau = i / 20.0;
    EXPECT_NEAR(RtcWeight(tau, kInf), RtcWeight(1 - tau, kInf), 1e-12);
    EXPECT_GT(std::abs(PcWeight(tau, 0.4, kInf) - PcWeight(1 - tau, 0.4, kInf)),
              1e-3);
  }
}

TEST(Weights, DomainErrors) {
  for (double tau : {0.0, 1.0, -0.1, 1.5}) {
    EXPECT_THROW(RtcWeight(tau, 10.0), DomainError);
    EXPECT_THROW(PcWeight(tau, 0.4, 10.0), DomainError);
    EXPECT_THROW(RTauSq(tau, 0.4), DomainError);
  }
}

TEST(GuidanceConfig, Validation) {
  GuidanceConfig c;
  EXPECT_NO_THROW(ValidateGuidanceConfig(c));
  c.rho = kUnboundedRadius;
  EXPECT_NO_THROW(ValidateGuidanceConfig(c));
  for (auto mutate : std::initializer_list<void (*)(GuidanceConfig&)>{
           [](GuidanceConfig& g) { g.sigma_d = 0; },
           [](GuidanceConfig& g) { g.beta = -1; },
           [](GuidanceConfig& g) { g.rho = 0; },
           [](GuidanceConfig& g) { g.n = 0; },
           [](GuidanceConfig& g) { g.epsilon = 0; },
           [](GuidanceConfig& g) { g.epsilon = 1e-5; }}) {
    GuidanceConfig bad;
    mutate(bad);
    EXPECT_THROW(ValidateGuidanceConfig(bad), StructuralError);
  }
}

TEST(PseudoinverseCorrection, Examples) {
  const ConstantVelocityField field(ActionChunk::Zero(2, 1));
  const ActionChunk a = ActionChunk::Zero(2, 1);
  const ActionChunk v = ActionChunk::Zero(2, 1);
  // A_hat = 0, so Y - A_hat = Y.
  InpaintSpec spec{ActionChunk(2, 1), Vector(2)};
  spec.target << 0.5, 7.0;
  spec.mask << 1.0, 0.0;
  const ActionChunk g =
      PseudoinverseCorrection(a, 0.4, v, spec, field, Observation{});
  EXPECT_DOUBLE_EQ(g(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(g(1, 0), 0.0);

  spec.mask.setZero();
  EXPECT_TRUE(PseudoinverseCorrection(a, 0.4, v, spec, field, Observation{})
                  .isZero(0.0));

  GaussianMixtureFieldParams p;
  p.components.push_back({1.0, StandardNormalChunk(2, 1, 1), 0.4});
  const GaussianMixtureField gm(p);
  const ActionChunk x = StandardNormalChunk(2, 1, 2);
  const ActionChunk vel = gm.Evaluate(x, 0.3, Observation{});
  InpaintSpec exact{OneStepEstimate(x, vel, 0.3), Vector::Ones(2)};
  EXPECT_TRUE(PseudoinverseCorrection(x, 0.3, vel, exact, gm, Observation{})
                  .isZero(0.0));
}

TEST(OtrProject, WorkedExample) {
  const ActionChunk g = OtrProject(Row({2, 3}), Row({1, 0}), 0.5, 1e-8);
  EXPECT_NEAR(g(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(g(0, 1), 0.5, 1e-8);
}

TEST(OtrProject, TrivialCases) {
  const ActionChunk v = Row({0.3, -1.2, 0.7});
  EXPECT_EQ(OtrProject(2.5 * v, v, 0.1, 1e-8), 2.5 * v);
  const ActionChunk g = Row({4.0, 9.0, -3.0});
  EXPECT_EQ(OtrProject(g, v, kUnboundedRadius, 1e-8), g);
  // Inside the region nothing changes.
  const ActionChunk inside = v + Row({0.01, 0.0, 0.0});
  EXPECT_EQ(OtrProject(inside, v, 1.0, 1e-8), inside);
}

TEST(OtrProject, DegenerateVelocityFallback) {
  const ActionChunk v = Row({1e-10, 0.0});
  const ActionChunk g = Row({3.0, 4.0});
  const double rho = 0.5, eps = 1e-8;
  const ActionChunk out = OtrProject(g, v, rho, eps);
  EXPECT_LE(out.norm(), rho * v.norm() + eps);
  EXPECT_TRUE(OtrProject(g, ActionChunk::Zero(1, 2), rho, eps).isZero(0.0));
}

TEST(OtrProject, RandomProperties) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dim(1, 64);
  std::uniform_real_distribution<double> log_rho(-2.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = dim(rng);
    const ActionChunk g = 3.0 * StandardNormalChunk(1, n, rng());
    const ActionChunk v = StandardNormalChunk(1, n, rng());
    const double rho = std::pow(10.0, log_rho(rng));
    const ActionChunk out = OtrProject(g, v, rho, 1e-8);
    const double vv = v.squaredNorm();
    const ActionChunk g_par = (g.cwiseProduct(v).sum() / vv) * v;
    EXPECT_LE((out - g_par).norm(), rho * v.norm() * (1 + 1e-9));
    const double in = g.cwiseProduct(v).sum();
    EXPECT_NEAR(out.cwiseProduct(v).sum(), in, 1e-10 * std::max(1.0, std::abs(in)));
    EXPECT_LT((OtrProject(out, v, rho, 1e-8) - out).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

// A random field and inpainting instance shared by the denoising tests.
struct Instance {
  GaussianMixtureField field;
  ActionChunk noise;
  InpaintSpec spec;
};

Instance MakeInstance(uint64_t seed) {
  GaussianMixtureFieldParams p;
  p.components.push_back({0.5, StandardNormalChunk(6, 2, seed), 0.3});
  p.components.push_back({0.5, StandardNormalChunk(6, 2, seed + 1), 0.3});
  Vector mask(6);
  mask << 1, 1, 0.5, 0.25, 0, 0;
  return {GaussianMixtureField(p), StandardNormalChunk(6, 2, seed + 2),
          InpaintSpec{StandardNormalChunk(6, 2, seed + 3), mask}};
}

TEST(GuidedDenoise, NaiveIsPlainEuler) {
  const Instance in = MakeInstance(10);
  GuidanceConfig c;
  c.method = GuidanceMethod::kNaive;
  FlowState s{in.noise, 0.0, 0};
  while (s.step_index < c.n) {
    s = EulerStep(s, in.field.Evaluate(s.chunk, s.tau, Observation{}), c.n);
  }
  EXPECT_EQ(GuidedDenoise(in.noise, Observation{}, in.field, std::nullopt, c),
            s.chunk);
  // A spec is ignored by NAIVE.
  EXPECT_EQ(GuidedDenoise(in.noise, Observation{}, in.field, in.spec, c),
            s.chunk);
}

TEST(GuidedDenoise, ZeroMaskMatchesNaiveBitForBit) {
  Instance in = MakeInstance(20);
  in.spec.mask.setZero();
  GuidanceConfig naive;
  naive.method = GuidanceMethod::kNaive;
  const ActionChunk expected =
      GuidedDenoise(in.noise, Observation{}, in.field, std::nullopt, naive);
  for (auto m : {GuidanceMethod::kRtc, GuidanceMethod::kPc,
                 GuidanceMethod::kPotr}) {
    GuidanceConfig c;
    c.method = m;
    EXPECT_EQ(GuidedDenoise(in.noise, Observation{}, in.field, in.spec, c),
              expected);
  }
}

TEST(GuidedDenoise, MethodReductions) {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const Instance in = MakeInstance(100 + 7 * seed);
    GuidanceConfig rtc;
    rtc.method = GuidanceMethod::kRtc;
    GuidanceConfig pc1 = rtc;
    pc1.method = GuidanceMethod::kPc;
    pc1.sigma_d = 1.0;
    EXPECT_LT((GuidedDenoise(in.noise, Observation{}, in.field, in.spec, rtc) -
               GuidedDenoise(in.noise, Observation{}, in.field, in.spec, pc1))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);

    GuidanceConfig pc;
    pc.method = GuidanceMethod::kPc;
    GuidanceConfig potr_inf = pc;
    potr_inf.method = GuidanceMethod::kPotr;
    potr_inf.rho = kUnboundedRadius;
    EXPECT_EQ(GuidedDenoise(in.noise, Observation{}, in.field, in.spec, pc),
              GuidedDenoise(in.noise, Observation{}, in.field, in.spec,
                            potr_inf));
  }
}

TEST(GuidedDenoise, GuidancePullsTowardTarget) {
  const Instance in = MakeInstance(30);
  GuidanceConfig naive;
  naive.method = GuidanceMethod::kNaive;
  const auto residual = [&](const ActionChunk& a) {
    return (in.spec.mask.asDiagonal() * (a - in.spec.target)).norm();
  };
  const double base = residual(
      GuidedDenoise(in.noise, Observation{}, in.field, std::nullopt, naive));
  for (auto m : {GuidanceMethod::kRtc, GuidanceMethod::kPc,
                 GuidanceMethod::kPotr}) {
    GuidanceConfig c;
    c.method = m;
    EXPECT_LT(residual(GuidedDenoise(in.noise, Observation{}, in.field,
                                     in.spec, c)),
              base)
        << MethodName(m);
  }
}

TEST(GuidedDenoise, TauZeroSwitch) {
  const Instance in = MakeInstance(40);
  GuidanceConfig skip;
  skip.method = GuidanceMethod::kRtc;
  // n = 1 consists of the k = 0 step only.
  skip.n = 1;
  skip.beta = 1.0;
  GuidanceConfig guided = skip;
  guided.guide_at_tau_zero = true;
  GuidanceConfig naive = skip;
  naive.method = GuidanceMethod::kNaive;

  // Constant velocity: dA_hat/dA = I, so the k = 0 residual moves the step.
  const ConstantVelocityField flat(StandardNormalChunk(6, 2, 41));
  const ActionChunk base =
      GuidedDenoise(in.noise, Observation{}, flat, std::nullopt, naive);
  EXPECT_EQ(GuidedDenoise(in.noise, Observation{}, flat, in.spec, skip), base);
  const ActionChunk moved =
      GuidedDenoise(in.noise, Observation{}, flat, in.spec, guided);
  // One Euler step of size 1 with w = beta = 1: A + v + W (Y - A - v).
  const ActionChunk expected =
      base + in.spec.mask.asDiagonal() * (in.spec.target - base);
  EXPECT_LT((moved - expected).cwiseAbs().maxCoeff(), 1e-12);

  // Gaussian-mixture prior: at tau = 0 the clean estimate is the prior mean
  // whatever the input, so the correction vanishes and the switch is moot.
  const ActionChunk gm_base =
      GuidedDenoise(in.noise, Observation{}, in.field, std::nullopt, naive);
  EXPECT_LT((GuidedDenoise(in.noise, Observation{}, in.field, in.spec, guided) -
             gm_base)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(GuidedDenoise, Deterministic) {
  const Instance in = MakeInstance(50);
  GuidanceConfig c;
  EXPECT_EQ(GuidedDenoise(in.noise, Observation{}, in.field, in.spec, c),
            GuidedDenoise(in.noise, Observation{}, in.field, in.spec, c));
}

TEST(GuidedDenoise, RequiresSpecForGuidedMethods) {
  const Instance in = MakeInstance(60);
  GuidanceConfig c;
  c.method = GuidanceMethod::kPc;
  EXPECT_THROW(GuidedDenoise(in.noise, Observation{}, in.field, std::nullopt, c),
               StructuralError);
  InpaintSpec bad = in.spec;
  bad.mask(0) = 1.5;
  EXPECT_THROW(GuidedDenoise(in.noise, Observation{}, in.field, bad, c),
               StructuralError);
}

TEST(MethodNames, RoundTrip) {
  for (auto m : {GuidanceMethod::kNaive, GuidanceMethod::kRtc,
                 GuidanceMethod::kPc, GuidanceMethod::kPotr}) {
    EXPECT_EQ(ParseMethod(MethodName(m)), m);
  }
  EXPECT_THROW(ParseMethod("POTR!"), StructuralError);
}

}  // namespace
}  // namespace chunkflow
