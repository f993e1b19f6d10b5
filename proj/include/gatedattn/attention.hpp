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
#include <vector>

#include "gatedattn/layers.hpp"
#include "gatedattn/stochastic.hpp"
#include "gatedattn/tensor.hpp"

namespace gatedattn {

struct AttentionOutput {
  Tensor context;  // [B x D]
  Tensor alpha;    // [B x T]
  // Positions carrying nonzero weight per example.
  std::vector<std::size_t> active_set_size;
  // Rows pushed through the scorer; closed and padded positions are never scored.
  std::size_t positions_scored = 0;
  // Examples whose hard gates were all closed and got the top-p position opened.
  std::size_t fallback_events = 0;
};

enum class GateApplication { soft, hard };

// Global attention over the valid positions of each example.
// Throws ContractError if an example has no valid position.
AttentionOutput soft_attention(const AttentionScorer& scorer, const Tensor& states,
                               std::span<const std::size_t> lengths);

// Attention restricted to open gates.
//
// soft: alpha_t proportional to soft_t * exp(e_t) over valid positions.
// hard: alpha_t proportional to exp(e_t) over positions with hard gate 1; only
//   those positions are scored. An example with every gate closed has its
//   highest-p valid position opened first (gates.hard is updated in place).
AttentionOutput gated_attention(const AttentionScorer& scorer, const Tensor& states,
                                GateState& gates, std::span<const std::size_t> lengths,
                                GateApplication mode);

// Opens argmax_t p_t for every example whose valid gates are all closed.
// Returns the number of examples changed.
std::size_t apply_gate_fallback(GateVector& hard, const Tensor& p,
                                std::span<const std::size_t> lengths);

struct LocalAttentionOptions {
  std::size_t window = 8;
  // false removes the Gaussian factor (the sigma -> infinity limit)
  bool gaussian = true;
};

// Windowed attention around a predicted centre L * sigmoid(v . tanh(W s)).
// Positions in [centre - window/2, centre + window/2] that are valid are scored;
// if none are, the valid position nearest the centre is used. Scores are
// softmax-normalised within the window and weighted by
// exp(-(t - centre)^2 / (2 sigma^2)), sigma = window / 4, then renormalised.
AttentionOutput local_attention(const AttentionScorer& scorer, const LocalPredictor& predictor,
                                const EncoderOutput& encoded,
                                std::span<const std::size_t> lengths,
                                const LocalAttentionOptions& options);

// Scores only rows with active[b * T + t] set; other entries are 0.
// states [B x T x D] -> [B x T].
Tensor score_positions(const AttentionScorer& scorer, const Tensor& states,
                       std::span<const std::uint8_t> active, std::size_t* scored = nullptr);

// sum_t alpha[b, t] * states[b, t, :]
Tensor attention_context(const Tensor& alpha, const Tensor& states);

}  // namespace gatedattn
