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

#include <vector>

#include "gatedattn/kernels.hpp"
#include "gatedattn/stochastic.hpp"

using namespace gatedattn;
using kernels::Trans;

namespace {

std::vector<double> random_buffer(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform() * 2.0 - 1.0;
  return v;
}

struct GemmCase {
  std::size_t n, k, m;
  Trans ta, tb;
  bool accumulate;
};

}  // namespace

class GemmAgainstReference : public ::testing::TestWithParam<GemmCase> {};

TEST_P(GemmAgainstReference, BitIdenticalForAnyThreadCount) {
  const GemmCase c = GetParam();
  Rng rng(c.n * 1000 + c.k * 10 + c.m);
  const auto a = random_buffer(c.n * c.k, rng);
  const auto b = random_buffer(c.k * c.m, rng);
  const auto init = random_buffer(c.n * c.m, rng);

  std::vector<double> expected = init;
  kernels::reference::gemm(a, b, expected, c.n, c.k, c.m, c.ta, c.tb, c.accumulate);

  for (int threads : {1, 2, 4}) {
    kernels::set_num_threads(threads);
    std::vector<double> got = init;
    kernels::gemm(a, b, got, c.n, c.k, c.m, c.ta, c.tb, c.accumulate);
    EXPECT_EQ(got, expected) << "threads=" << threads;
  }
  kernels::set_num_threads(0);
}

INSTANTIATE_TEST_SUITE_P(
    Shapes, GemmAgainstReference,
    ::testing::Values(GemmCase{1, 1, 1, Trans::no, Trans::no, false},
                      GemmCase{7, 5, 3, Trans::no, Trans::no, false},
                      GemmCase{7, 5, 3, Trans::yes, Trans::no, true},
                      GemmCase{7, 5, 3, Trans::no, Trans::yes, true},
                      GemmCase{7, 5, 3, Trans::yes, Trans::yes, false},
                      GemmCase{64, 96, 128, Trans::no, Trans::no, false},
                      GemmCase{64, 96, 128, Trans::no, Trans::yes, true},
                      GemmCase{96, 64, 128, Trans::yes, Trans::no, true}));

TEST(GemmBatched, MatchesPerBatchReference) {
  Rng rng(9);
  const std::size_t batch = 6, n = 4, k = 8, m = 5;
  const auto a = random_buffer(batch * n * k, rng);
  const auto b = random_buffer(batch * k * m, rng);
  std::vector<double> expected(batch * n * m);
  for (std::size_t i = 0; i < batch; ++i) {
    kernels::reference::gemm(std::span(a).subspan(i * n * k, n * k),
                             std::span(b).subspan(i * k * m, k * m),
                             std::span(expected).subspan(i * n * m, n * m), n, k, m);
  }
  for (int threads : {1, 3}) {
    kernels::set_num_threads(threads);
    std::vector<double> got(batch * n * m);
    kernels::gemm_batched(a, b, got, batch, n, k, m, n * k, k * m);
    EXPECT_EQ(got, expected);
  }
  kernels::set_num_threads(0);
}

TEST(GemmBatched, ZeroStrideSharesOperand) {
  Rng rng(10);
  const std::size_t batch = 3, n = 2, k = 3, m = 2;
  const auto a = random_buffer(batch * n * k, rng);
  const auto b = random_buffer(k * m, rng);
  std::vector<double> got(batch * n * m);
  kernels::gemm_batched(a, b, got, batch, n, k, m, n * k, 0);
  std::vector<double> expected(batch * n * m);
  kernels::reference::gemm(a, b, expected, batch * n, k, m);
  EXPECT_EQ(got, expected);
}

TEST(Threads, EnvironmentCap) {
  setenv("GATED_ATTN_THREADS", "1", 1);
  kernels::configure_threads_from_env();
  EXPECT_EQ(kernels::num_threads(), 1);
  unsetenv("GATED_ATTN_THREADS");
  kernels::set_num_threads(0);
}
