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
#include <functional>
#include <vector>

#include "gatedattn/errors.hpp"
#include "gatedattn/gradcheck.hpp"
#include "gatedattn/layers.hpp"
#include "gatedattn/ops.hpp"
#include "gatedattn/stochastic.hpp"

using namespace gatedattn;

namespace {

Tensor random_leaf(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = lo + (hi - lo) * rng.uniform();
  t.set_requires_grad(true);
  return t;
}

// Reduces any tensor to a scalar with fixed random weights so every output
// element contributes a distinct cotangent.
Tensor project(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w(y.shape());
  for (double& v : w.mutable_data()) v = rng.uniform() - 0.5;
  return sum(mul(y, w));
}

void expect_gradcheck(const std::function<Tensor()>& f, std::vector<Tensor> inputs) {
  const GradcheckReport report = gradcheck(f, std::move(inputs), 1e-5, 1e-4);
  EXPECT_TRUE(report.passed) << report.summary();
}

}  // namespace

TEST(Primitives, TrivialValues) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor(Shape{1}, 0.0)).item(), 0.5);
  EXPECT_DOUBLE_EQ(tanh(Tensor(Shape{1}, 0.0)).item(), 0.0);

  Rng rng(3);
  Tensor a = random_leaf({3, 3}, rng);
  Tensor identity(Shape{3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor out = matmul(identity, a);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(out[i], a[i]);
}

TEST(Primitives, ShapeMismatchNamesOpAndShapes) {
  Tensor a(Shape{2, 3});
  Tensor b(Shape{4, 2});
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[4x2]"), std::string::npos);
  }
  EXPECT_THROW(add(Tensor(Shape{2, 3}), Tensor(Shape{2})), ShapeError);
}

TEST(Primitives, NanPropagatesWithoutThrowing) {
  Tensor x(Shape{2}, {std::nan(""), 1.0});
  const Tensor y = exp(x);
  EXPECT_TRUE(std::isnan(y[0]));
  EXPECT_DOUBLE_EQ(y[1], std::exp(1.0));
}

TEST(Backward, QuadraticForm) {
  Tape tape;
  TapeScope scope(tape);
  Tensor w(Shape{3}, {1, 2, 3});
  w.set_requires_grad(true);
  backward(sum(mul(w, w)));
  EXPECT_DOUBLE_EQ(w.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(w.grad()[1], 4.0);
  EXPECT_DOUBLE_EQ(w.grad()[2], 6.0);
}

TEST(Backward, SigmoidAtZero) {
  Tape tape;
  TapeScope scope(tape);
  Tensor w(Shape{1}, 0.0);
  w.set_requires_grad(true);
  backward(sum(sigmoid(w)));
  EXPECT_DOUBLE_EQ(w.grad()[0], 0.25);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape tape;
  TapeScope scope(tape);
  Tensor w(Shape{2}, 1.0);
  w.set_requires_grad(true);
  EXPECT_THROW(backward(exp(w)), ContractError);
}

TEST(Backward, RequiresActiveTape) {
  Tensor w(Shape{1}, 1.0);
  EXPECT_THROW(backward(w), ContractError);
}

TEST(Backward, UnreachableLeafKeepsZeroGrad) {
  Tape tape;
  TapeScope scope(tape);
  Tensor used(Shape{2}, 1.0);
  Tensor unused(Shape{2}, 1.0);
  used.set_requires_grad(true);
  unused.set_requires_grad(true);
  const Tensor other = exp(unused);  // recorded but not part of the loss
  backward(sum(used));
  ASSERT_EQ(unused.grad().size(), 2u);
  EXPECT_EQ(unused.grad()[0], 0.0);
  EXPECT_EQ(unused.grad()[1], 0.0);
  EXPECT_EQ(used.grad()[0], 1.0);
}

TEST(Backward, LeafUsedKTimesAccumulatesPathGradients) {
  // loss = x*x*x + 2x + sin-free composite: d/dx = 3x^2 + 2 + exp(x)
  Tape tape;
  TapeScope scope(tape);
  Tensor x(Shape{1}, 0.7);
  x.set_requires_grad(true);
  const Tensor loss = sum(add(add(mul(mul(x, x), x), scale(x, 2.0)), exp(x)));
  backward(loss);
  EXPECT_NEAR(x.grad()[0], 3 * 0.49 + 2.0 + std::exp(0.7), 1e-14);
}

TEST(Backward, GradientsAccumulateAcrossCalls) {
  Tensor w(Shape{1}, 2.0);
  w.set_requires_grad(true);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    TapeScope scope(tape);
    backward(sum(mul(w, w)));
  }
  EXPECT_DOUBLE_EQ(w.grad()[0], 8.0);
  w.zero_grad();
  EXPECT_DOUBLE_EQ(w.grad()[0], 0.0);
}

TEST(Gradcheck, ExpSum) {
  Tensor x(Shape{2}, {0.0, 1.0});
  x.set_requires_grad(true);
  expect_gradcheck([&] { return sum(exp(x)); }, {x});
}

TEST(Gradcheck, ReportsFailureForWrongGradient) {
  // detach hides the dependence from the tape, so the analytic grad is 0
  Tensor x(Shape{2}, {0.3, -0.4});
  x.set_requires_grad(true);
  const GradcheckReport r = gradcheck([&] { return sum(mul(detach(x), x)); }, {x});
  EXPECT_FALSE(r.passed);
}

TEST(Gradcheck, NanIsFailure) {
  Tensor x(Shape{1}, -1.0);
  x.set_requires_grad(true);
  const GradcheckReport r = gradcheck([&] { return sum(log(x)); }, {x});
  EXPECT_FALSE(r.passed);
}

// Every primitive against central differences on random inputs in [-2, 2].
class PrimitiveGradients : public ::testing::TestWithParam<int> {};

TEST_P(PrimitiveGradients, AgreeWithFiniteDifferences) {
  Rng rng(100 + static_cast<std::uint64_t>(GetParam()));
  const std::uint64_t pseed = 7 + static_cast<std::uint64_t>(GetParam());
  Tensor a = random_leaf({3, 4}, rng);
  Tensor b = random_leaf({3, 4}, rng);
  Tensor bias = random_leaf({4}, rng);
  Tensor rows = random_leaf({3}, rng);
  Tensor m = random_leaf({4, 2}, rng);
  Tensor pos = random_leaf({3, 4}, rng, 0.2, 2.0);
  Tensor batch_a = random_leaf({2, 3, 4}, rng);
  Tensor batch_b = random_leaf({2, 4, 2}, rng);

  expect_gradcheck([&] { return project(matmul(a, m), pseed); }, {a, m});
  expect_gradcheck([&] { return project(matmul(batch_a, m), pseed); }, {batch_a, m});
  expect_gradcheck([&] { return project(matmul(batch_a, batch_b), pseed); }, {batch_a, batch_b});
  expect_gradcheck([&] { return project(transpose_last2(batch_a), pseed); }, {batch_a});
  expect_gradcheck([&] { return project(add(a, b), pseed); }, {a, b});
  expect_gradcheck([&] { return project(add(a, bias), pseed); }, {a, bias});
  expect_gradcheck([&] { return project(sub(a, bias), pseed); }, {a, bias});
  expect_gradcheck([&] { return project(mul(a, b), pseed); }, {a, b});
  expect_gradcheck([&] { return project(mul(a, bias), pseed); }, {a, bias});
  expect_gradcheck([&] { return project(div(a, pos), pseed); }, {a, pos});
  expect_gradcheck([&] { return project(mul_rows(a, rows), pseed); }, {a, rows});
  expect_gradcheck([&] { return project(add_rows(a, rows), pseed); }, {a, rows});
  expect_gradcheck([&] { return project(scale(a, -1.5), pseed); }, {a});
  expect_gradcheck([&] { return project(add_scalar(a, 0.3), pseed); }, {a});
  expect_gradcheck([&] { return project(neg(a), pseed); }, {a});
  expect_gradcheck([&] { return project(reciprocal(pos), pseed); }, {pos});
  expect_gradcheck([&] { return project(sigmoid(a), pseed); }, {a});
  expect_gradcheck([&] { return project(tanh(a), pseed); }, {a});
  expect_gradcheck([&] { return project(exp(a), pseed); }, {a});
  expect_gradcheck([&] { return project(log(pos), pseed); }, {pos});
  expect_gradcheck([&] { return project(clamp(a, -1.0, 1.0), pseed); }, {a});
  expect_gradcheck([&] { return scale(sum(a), 0.5); }, {a});
  expect_gradcheck([&] { return mean(mul(a, a)); }, {a});
  expect_gradcheck([&] { return project(sum_last(batch_a), pseed); }, {batch_a});
  expect_gradcheck([&] { return project(reshape(a, {4, 3}), pseed); }, {a});
  expect_gradcheck(
      [&] {
        const Tensor parts[2] = {a, b};
        return project(concat(parts, 1), pseed);
      },
      {a, b});
  expect_gradcheck(
      [&] {
        const Tensor parts[2] = {a, b};
        return project(concat(parts, 0), pseed);
      },
      {a, b});
  expect_gradcheck([&] { return project(slice(batch_a, 1, 1, 3), pseed); }, {batch_a});
  expect_gradcheck(
      [&] {
        const std::vector<std::uint8_t> mask{1, 0, 0, 1, 0, 1, 0, 0, 0, 0, 1, 0};
        return project(masked_fill(a, mask, 9.0), pseed);
      },
      {a});
  expect_gradcheck(
      [&] {
        const std::vector<std::size_t> idx{2, 0, 2};
        return project(gather_rows(a, idx), pseed);
      },
      {a});
  expect_gradcheck(
      [&] {
        const std::vector<std::size_t> idx{4, 1, 0};
        return project(scatter_rows(a, idx, 5), pseed);
      },
      {a});
  expect_gradcheck([&] { return project(weighted_softmax(a, pos), pseed); }, {a, pos});
  expect_gradcheck([&] { return project(softmax_rows(a), pseed); }, {a});
}

INSTANTIATE_TEST_SUITE_P(RandomInputs, PrimitiveGradients, ::testing::Range(0, 5));

TEST(Composite, LstmStepLossMatchesFiniteDifferences) {
  Rng rng(11);
  LstmParams params = LstmParams::init(3, 4, rng);
  Tensor x = random_leaf({2, 3}, rng);
  Tensor h0 = random_leaf({2, 4}, rng, -0.5, 0.5);
  Tensor c0 = random_leaf({2, 4}, rng, -0.5, 0.5);
  auto f = [&] {
    const LstmState s = lstm_step(params, {h0, c0}, x);
    return add(sum(mul(s.h, s.h)), sum(s.c));
  };
  expect_gradcheck(f, {params.w_input, params.w_hidden, params.bias, x, h0, c0});
}

TEST(Tape, ReplayIsBitIdentical) {
  auto run = [] {
    Rng rng(5);
    Tensor w = random_leaf({4, 4}, rng);
    Tensor x = random_leaf({3, 4}, rng);
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = sum(tanh(matmul(x, w)));
    tape.backward(loss);
    std::vector<double> out(w.grad().begin(), w.grad().end());
    out.push_back(loss.item());
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Tape, NoRecordingWithoutTapeOrTrainableInputs) {
  Tensor w(Shape{2}, 1.0);
  w.set_requires_grad(true);
  EXPECT_FALSE(exp(w).requires_grad());  // no active tape
  Tape tape;
  TapeScope scope(tape);
  EXPECT_FALSE(exp(Tensor(Shape{2}, 1.0)).requires_grad());
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_TRUE(exp(w).requires_grad());
  EXPECT_EQ(tape.size(), 1u);
}

TEST(Tensor, ShapeInvariant) {
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  Tensor t(Shape{2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(to_string(t.shape()), "[2x3x4]");
}
