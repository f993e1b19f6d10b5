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
#include <cstdint>
#include <span>
#include <vector>

#include "gatedattn/tensor.hpp"

// Differentiable primitives. Each records a node on the active tape when any
// input requires a gradient. Binary elementwise ops accept a second operand
// whose shape is a trailing suffix of the first (broadcast over leading axes).
namespace gatedattn {

// [n x k] * [k x m]; [B x n x k] * [k x m]; [B x n x k] * [B x k x m].
Tensor matmul(const Tensor& a, const Tensor& b);
// Swaps the last two axes of a rank-2 or rank-3 tensor.
Tensor transpose_last2(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// x[i, ...] * s[i] and x[i, ...] + s[i], one scalar per leading index.
Tensor mul_rows(const Tensor& x, const Tensor& s);
Tensor add_rows(const Tensor& x, const Tensor& s);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor neg(const Tensor& x);
Tensor reciprocal(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
// Gradient is zero where the input was clipped.
Tensor clamp(const Tensor& x, double lo, double hi);

// Full reduction to shape [1].
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Reduction over the last axis; [.., T] -> [..]. Rank-1 input gives [1].
Tensor sum_last(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

// out = mask[i] ? value : x[i]; no gradient flows through filled entries.
Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> mask, double value);

// Rows of a rank-2 table; gradients scatter-add back into the table.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> rows);
// Places src rows at the given row indices of a zero [total_rows x width] result.
Tensor scatter_rows(const Tensor& src, std::span<const std::size_t> rows,
                    std::size_t total_rows);

// Same values, no gradient path.
Tensor detach(const Tensor& x);

// Fused LSTM cell for step t. x_proj [B x T x 4H] holds the input projection
// (plus bias) for every step, recurrent [B x 4H] is h_prev W_hidden and
// prev [B x 2H] is the previous (h | c). Gate order i, f, g, o. Returns the new
// (h | c) as [B x 2H]; rows with keep[b] == 0 are zero and pass no gradient.
Tensor lstm_cell(const Tensor& x_proj, std::size_t t, const Tensor& recurrent, const Tensor& prev,
                 std::span<const std::uint8_t> keep);

// Composite (not a primitive): rows of weights[r,t] * exp(scores[r,t]) normalized
// to sum 1 over t. Positions with zero weight get exactly zero. The shift used
// for stability is the row max over positions with positive weight.
Tensor weighted_softmax(const Tensor& scores, const Tensor& weights);
// Plain softmax over the last axis of a rank-2 tensor.
Tensor softmax_rows(const Tensor& scores);

}  // namespace gatedattn
