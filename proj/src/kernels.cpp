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

#include "gatedattn/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gatedattn::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

int g_threads = 0;  // 0 = runtime default

int thread_count() {
#ifdef _OPENMP
  return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
  return 1;
#endif
}

void transpose(std::span<const double> src, std::vector<double>& dst, std::size_t rows,
               std::size_t cols) {
  dst.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

// Rows [begin, end) of c = op(a) * b with b stored k x m (not transposed).
// Every c[i][j] starts from its old value (or 0) and adds a[i][kk] * b[kk][j]
// for kk = 0, 1, ... in order, exactly as the reference does, so the 4x4
// register tiles change speed but not results.
void gemm_rows(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
               std::size_t m, bool a_trans, bool accumulate, std::size_t begin,
               std::size_t end) {
  constexpr std::size_t kRows = 4;
  constexpr std::size_t kCols = 4;
  const std::size_t a_row = a_trans ? 1 : k;  // stride between rows of op(a)
  const std::size_t a_col = a_trans ? n : 1;  // stride along kk
  std::size_t i = begin;
  for (; i + kRows <= end; i += kRows) {
    std::size_t j = 0;
    for (; j + kCols <= m; j += kCols) {
      double acc[kRows][kCols];
      for (std::size_t r = 0; r < kRows; ++r) {
        for (std::size_t q = 0; q < kCols; ++q) {
          acc[r][q] = accumulate ? c[(i + r) * m + j + q] : 0.0;
        }
      }
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double* brow = b + kk * m + j;
        for (std::size_t r = 0; r < kRows; ++r) {
          const double av = a[(i + r) * a_row + kk * a_col];
          for (std::size_t q = 0; q < kCols; ++q) acc[r][q] += av * brow[q];
        }
      }
      for (std::size_t r = 0; r < kRows; ++r) {
        for (std::size_t q = 0; q < kCols; ++q) c[(i + r) * m + j + q] = acc[r][q];
      }
    }
    for (; j < m; ++j) {
      for (std::size_t r = 0; r < kRows; ++r) {
        double sum = accumulate ? c[(i + r) * m + j] : 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) sum += a[(i + r) * a_row + kk * a_col] * b[kk * m + j];
        c[(i + r) * m + j] = sum;
      }
    }
  }
  for (; i < end; ++i) {
    double* crow = c + i * m;
    if (!accumulate) std::fill(crow, crow + m, 0.0);
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = a[i * a_row + kk * a_col];
      const double* brow = b + kk * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  }
}

void gemm_serial(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
                 std::size_t m, Trans ta, Trans tb, bool accumulate,
                 std::vector<double>& scratch) {
  const double* bb = b;
  if (tb == Trans::yes) {
    transpose(std::span<const double>(b, m * k), scratch, m, k);
    bb = scratch.data();
  }
  gemm_rows(a, bb, c, n, k, m, ta == Trans::yes, accumulate, 0, n);
}

}  // namespace

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m, Trans ta, Trans tb, bool accumulate) {
  std::vector<double> bt;
  const double* bb = b.data();
  if (tb == Trans::yes) {
    transpose(b, bt, m, k);
    bb = bt.data();
  }
  const bool a_trans = ta == Trans::yes;
  const std::size_t work = n * k * m;
  const int threads = thread_count();
  if (threads <= 1 || work < kParallelWork || n < 2) {
    gemm_rows(a.data(), bb, c.data(), n, k, m, a_trans, accumulate, 0, n);
    return;
  }
  const auto blocks = static_cast<std::ptrdiff_t>((n + 3) / 4);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const auto row = static_cast<std::size_t>(blk) * 4;
    gemm_rows(a.data(), bb, c.data(), n, k, m, a_trans, accumulate, row, std::min(n, row + 4));
  }
}

void gemm_batched(std::span<const double> a, std::span<const double> b,
                  std::span<double> c, std::size_t batch, std::size_t n, std::size_t k,
                  std::size_t m, std::size_t stride_a, std::size_t stride_b, Trans ta,
                  Trans tb, bool accumulate) {
  const std::size_t work = batch * n * k * m;
  const int threads = thread_count();
  if (threads <= 1 || work < kParallelWork || batch < 2) {
    std::vector<double> scratch;
    for (std::size_t bi = 0; bi < batch; ++bi) {
      gemm_serial(a.data() + bi * stride_a, b.data() + bi * stride_b, c.data() + bi * n * m,
                  n, k, m, ta, tb, accumulate, scratch);
    }
    return;
  }
#pragma omp parallel num_threads(threads)
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (std::ptrdiff_t bi = 0; bi < static_cast<std::ptrdiff_t>(batch); ++bi) {
      const auto idx = static_cast<std::size_t>(bi);
      gemm_serial(a.data() + idx * stride_a, b.data() + idx * stride_b,
                  c.data() + idx * n * m, n, k, m, ta, tb, accumulate, scratch);
    }
  }
}

void configure_threads_from_env() {
  if (const char* env = std::getenv("GATED_ATTN_THREADS")) {
    try {
      set_num_threads(std::stoi(env));
    } catch (const std::exception&) {
      // unparsable value: keep the runtime default
    }
  }
}

void set_num_threads(int threads) { g_threads = std::max(threads, 0); }

int num_threads() { return thread_count(); }

namespace reference {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t n, std::size_t k, std::size_t m, Trans ta, Trans tb, bool accumulate) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double sum = accumulate ? c[i * m + j] : 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = ta == Trans::yes ? a[kk * n + i] : a[i * k + kk];
        const double bv = tb == Trans::yes ? b[j * k + kk] : b[kk * m + j];
        sum += av * bv;
      }
      c[i * m + j] = sum;
    }
  }
}

}  // namespace reference

}  // namespace gatedattn::kernels
