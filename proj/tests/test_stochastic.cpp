/* Copyright 2026 The GatedAttention Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "gatedattn/errors.hpp"
#include "gatedattn/gradcheck.hpp"
#include "gatedattn/ops.hpp"
#include "gatedattn/stochastic.hpp"

using namespace gatedattn;

namespace {

GumbelNoise fixed_noise(Shape shape, double eps0, double eps1) {
  return GumbelNoise{Tensor(shape, eps0), Tensor(std::move(shape), eps1)};
}

}  // namespace

TEST(Gumbel, MedianAnchor) {
  EXPECT_NEAR(gumbel_from_uniform(1.0 / std::numbers::e), 0.0, 1e-15);
}

TEST(Gumbel, ClampsExtremeUniforms) {
  EXPECT_TRUE(std::isfinite(gumbel_from_uniform(0.0)));
  EXPECT_TRUE(std::isfinite(gumbel_from_uniform(1.0)));
}

TEST(Gumbel, MonteCarloMoments) {
  Rng rng(2024);
  const Tensor s = sample_gumbel({100000}, rng);
  double mean = 0.0;
  for (double v : s.data()) mean += v;
  mean /= static_cast<double>(s.size());
  double var = 0.0;
  for (double v : s.data()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(s.size() - 1);
  EXPECT_NEAR(mean, 0.5772156649, 0.02);
  EXPECT_NEAR(var, std::numbers::pi * std::numbers::pi / 6.0, 0.05);
}

TEST(Bernoulli, DegenerateProbabilities) {
  Rng rng(1);
  const Tensor p(Shape{1000}, 0.0);
  for (auto g : sample_bernoulli(p, rng)) EXPECT_EQ(g, 0);
  const Tensor q(Shape{1000}, 1.0);
  for (auto g : sample_bernoulli(q, rng)) EXPECT_EQ(g, 1);
}

TEST(Bernoulli, HalfProbabilityMean) {
  Rng rng(8);
  const auto g = sample_bernoulli(Tensor(Shape{10000}, 0.5), rng);
  double mean = 0.0;
  for (auto v : g) mean += v;
  mean /= 10000.0;
  EXPECT_GE(mean, 0.48);
  EXPECT_LE(mean, 0.52);
}

TEST(Bernoulli, RejectsOutOfRange) {
  Rng rng(1);
  EXPECT_THROW(sample_bernoulli(Tensor(Shape{2}, {0.5, 1.2}), rng), ContractError);
  EXPECT_THROW(sample_bernoulli(Tensor(Shape{1}, {-0.1}), rng), ContractError);
}

TEST(HardGates, ThresholdBoundaryOpens) {
  Rng rng(0);
  const auto g = hard_gates(Tensor(Shape{3}, {0.2, 0.7, 0.5}), GateMode::threshold, rng);
  EXPECT_EQ(g, (GateVector{0, 1, 1}));
}

TEST(HardGates, SampleModePerPositionMeans) {
  Rng rng(31);
  const Tensor p(Shape{2}, {0.9, 0.1});
  double open0 = 0, open1 = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto g = hard_gates(p, GateMode::sample, rng);
    open0 += g[0];
    open1 += g[1];
  }
  EXPECT_NEAR(open0 / draws, 0.9, 0.02);
  EXPECT_NEAR(open1 / draws, 0.1, 0.02);
  EXPECT_EQ(hard_gates(Tensor(Shape{1}, 1.0), GateMode::sample, rng)[0], 1);
}

TEST(GumbelSoftmax, SymmetricNoiseAtHalf) {
  for (double tau : {0.1, 0.5, 1.0, 2.0}) {
    const GateState s =
        gumbel_softmax_gate(Tensor(Shape{1}, 0.5), tau, fixed_noise({1}, 0.37, 0.37));
    EXPECT_DOUBLE_EQ(s.soft[0], 0.5) << "tau=" << tau;
  }
}

TEST(GumbelSoftmax, HandEvaluation) {
  const GateState s = gumbel_softmax_gate(Tensor(Shape{1}, 0.8), 1.0, fixed_noise({1}, 0.0, 0.0));
  EXPECT_NEAR(s.soft[0], 0.8, 1e-12);
  EXPECT_EQ(s.hard[0], 1);
}

TEST(GumbelSoftmax, ArgmaxLimitAtSmallTemperature) {
  // log 0.3 + 0.5 = -0.704 vs log 0.7 + 0.0 = -0.357: closed side wins
  const GateState closed =
      gumbel_softmax_gate(Tensor(Shape{1}, 0.3), 1e-4, fixed_noise({1}, 0.0, 0.5));
  EXPECT_LT(closed.soft[0], 1e-12);
  EXPECT_EQ(closed.hard[0], 0);
  // log 0.3 + 1.0 = 0.796 > log 0.7: open side wins
  const GateState open =
      gumbel_softmax_gate(Tensor(Shape{1}, 0.3), 1e-4, fixed_noise({1}, 0.0, 1.0));
  EXPECT_GT(open.soft[0], 1.0 - 1e-12);
  EXPECT_EQ(open.hard[0], 1);
}

TEST(GumbelSoftmax, RejectsNonPositiveTemperature) {
  Rng rng(1);
  EXPECT_THROW(gumbel_softmax_gate(Tensor(Shape{1}, 0.5), 0.0, rng), ContractError);
  EXPECT_THROW(gumbel_softmax_gate(Tensor(Shape{1}, 0.5), -1.0, rng), ContractError);
}

TEST(GumbelSoftmax, SaturatedProbabilitiesStayFinite) {
  Rng rng(2);
  const GateState s = gumbel_softmax_gate(Tensor(Shape{2}, {0.0, 1.0}), 0.5, rng);
  for (double v : s.soft.data()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(GumbelSoftmax, PairSumsToOneExactly) {
  Rng rng(77);
  Rng prng(78);
  Tensor p(Shape{5000});
  for (double& v : p.mutable_data()) v = prng.uniform();
  for (double tau : {0.01, 0.5, 1.0, 2.0}) {
    const GateState s = gumbel_softmax_gate(p, tau, rng);
    for (double v : s.soft.data()) ASSERT_EQ((1.0 - v) + v, 1.0);
  }
}

TEST(GumbelSoftmax, MonotoneInProbabilityForFixedNoise) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const double e0 = gumbel_from_uniform(rng.uniform());
    const double e1 = gumbel_from_uniform(rng.uniform());
    double previous = -1.0;
    for (double p = 0.05; p < 0.96; p += 0.05) {
      const double g =
          gumbel_softmax_gate(Tensor(Shape{1}, p), 1.0, fixed_noise({1}, e0, e1)).soft[0];
      ASSERT_GT(g, previous);
      previous = g;
    }
  }
}

TEST(GumbelSoftmax, EntropyNonIncreasingAsTemperatureDrops) {
  const std::vector<double> taus{2.0, 1.5, 1.0, 0.5};
  const std::size_t draws = 20000;
  std::vector<double> entropies;
  for (double tau : taus) {
    Rng rng(99);  // common random numbers across temperatures
    const GateState s = gumbel_softmax_gate(Tensor(Shape{draws}, 0.3), tau, rng);
    double h = 0.0;
    for (double g : s.soft.data()) {
      const double a = std::max(g, 1e-300);
      const double b = std::max(1.0 - g, 1e-300);
      h -= g * std::log(a) + (1.0 - g) * std::log(b);
    }
    entropies.push_back(h / static_cast<double>(draws));
  }
  for (std::size_t i = 1; i < entropies.size(); ++i) {
    EXPECT_LE(entropies[i], entropies[i - 1]) << "tau=" << taus[i];
  }
}

TEST(GumbelSoftmax, GradientWithFrozenNoise) {
  Rng rng(12);
  Tensor p(Shape{6}, {0.1, 0.3, 0.5, 0.6, 0.8, 0.95});
  p.set_requires_grad(true);
  const GumbelNoise noise = draw_gumbel_noise({6}, rng);
  for (double tau : {0.5, 1.0, 2.0}) {
    const auto report = gradcheck(
        [&] {
          const GateState s = gumbel_softmax_gate(p, tau, noise);
          return sum(mul(s.soft, Tensor(Shape{6}, {1, -2, 3, 0.5, -1, 2})));
        },
        {p});
    EXPECT_TRUE(report.passed) << report.summary();
  }
}

TEST(Rng, FixedSeedReproducesTrajectory) {
  auto run = [] {
    Rng rng(42);
    std::vector<double> out;
    for (int i = 0; i < 5; ++i) {
      const GateState s = gumbel_softmax_gate(Tensor(Shape{4}, 0.4), 1.0, rng);
      out.insert(out.end(), s.soft.data().begin(), s.soft.data().end());
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Rng, StateRoundTrip) {
  Rng a(5);
  a.uniform();
  Rng b(0);
  b.set_state(a.state());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, DerivedStreamsDiffer) {
  const Rng base(7);
  Rng s1 = base.derive(1);
  Rng s2 = base.derive(2);
  EXPECT_NE(s1.next(), s2.next());
  Rng s1_again = base.derive(1);
  Rng s1_copy = Rng(7).derive(1);
  EXPECT_EQ(s1_again.next(), s1_copy.next());
}
