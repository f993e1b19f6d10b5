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

#pragma once

#include <cstddef>
#include <span>

namespace gatedattn::kernels {

enum class Trans { no, yes };

// c[n x m] = op(a) * op(b) (+ c when accumulate), where op(a) is n x k and
// op(b) is k x m. With Trans::yes the operand is stored transposed.
//
// Every output element is produced by one thread summing over k in ascending
// order, so results are bit-identical to the reference kernels and do not
// depend on the thread count.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m, Trans ta = Trans::no,
          Trans tb = Trans::no, bool accumulate = false);

// Independent products over a leading batch axis. A stride of zero reuses the
// same operand for every batch entry.
void gemm_batched(std::span<const double> a, std::span<const double> b,
                  std::span<double> c, std::size_t batch, std::size_t n, std::size_t k,
                  std::size_t m, std::size_t stride_a, std::size_t stride_b,
                  Trans ta = Trans::no, Trans tb = Trans::no, bool accumulate = false);

// Thread cap for the parallel kernels. Reads GATED_ATTN_THREADS when set.
void configure_threads_from_env();
void set_num_threads(int threads);
int num_threads();

// Serial kernels with the textbook loop order, kept as the oracle for the
// parallel versions above.
namespace reference {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m, Trans ta = Trans::no,
          Trans tb = Trans::no, bool accumulate = false);

}  // namespace reference

}  // namespace gatedattn::kernels
