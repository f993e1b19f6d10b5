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

#include "gatedattn/attention.hpp"

#include <algorithm>
#include <cmath>

#include "gatedattn/errors.hpp"
#include "gatedattn/ops.hpp"

namespace gatedattn {

namespace {

void check_states(const char* op, const Tensor& states, std::span<const std::size_t> lengths) {
  if (states.rank() != 3) {
    throw ShapeError(std::string(op) + ": expected [B x T x D] states, got " +
                     to_string(states.shape()));
  }
  if (lengths.size() != states.dim(0)) {
    throw ShapeError(std::string(op) + ": " + std::to_string(lengths.size()) +
                     " lengths for batch of " + std::to_string(states.dim(0)));
  }
  for (std::size_t len : lengths) {
    if (len > states.dim(1)) throw ContractError(std::string(op) + ": length exceeds width");
  }
}

AttentionOutput attend(const AttentionScorer& scorer, const Tensor& states, const Tensor& weights,
                       std::span<const std::uint8_t> active) {
  AttentionOutput out;
  const Tensor scores = score_positions(scorer, states, active, &out.positions_scored);
  out.alpha = weighted_softmax(scores, weights);
  out.context = attention_context(out.alpha, states);
  const std::size_t batch = states.dim(0);
  const std::size_t steps = states.dim(1);
  auto wv = weights.data();
  out.active_set_size.assign(batch, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      if (wv[b * steps + t] > 0.0) ++out.active_set_size[b];
    }
  }
  return out;
}

std::vector<std::uint8_t> valid_positions(std::size_t batch, std::size_t steps,
                                          std::span<const std::size_t> lengths) {
  std::vector<std::uint8_t> valid(batch * steps, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < lengths[b]; ++t) valid[b * steps + t] = 1;
  }
  return valid;
}

}  // namespace

Tensor score_positions(const AttentionScorer& scorer, const Tensor& states,
                       std::span<const std::uint8_t> active, std::size_t* scored) {
  const std::size_t batch = states.dim(0);
  const std::size_t steps = states.dim(1);
  const std::size_t width = states.dim(2);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (active[i]) rows.push_back(i);
  }
  if (scored != nullptr) *scored = rows.size();
  if (rows.empty()) return Tensor(Shape{batch, steps});
  const Tensor flat = reshape(states, {batch * steps, width});
  const Tensor e = scorer.score(gather_rows(flat, rows));
  return reshape(scatter_rows(e, rows, batch * steps), {batch, steps});
}

Tensor attention_context(const Tensor& alpha, const Tensor& states) {
  const std::size_t batch = states.dim(0);
  const std::size_t steps = states.dim(1);
  const Tensor ctx = matmul(reshape(alpha, {batch, 1, steps}), states);
  return reshape(ctx, {batch, states.dim(2)});
}

AttentionOutput soft_attention(const AttentionScorer& scorer, const Tensor& states,
                               std::span<const std::size_t> lengths) {
  check_states("soft_attention", states, lengths);
  for (std::size_t len : lengths) {
    if (len == 0) throw ContractError("soft_attention: example with no valid position");
  }
  const std::size_t batch = states.dim(0);
  const std::size_t steps = states.dim(1);
  return attend(scorer, states, validity_mask(batch, steps, lengths),
                valid_positions(batch, steps, lengths));
}

std::size_t apply_gate_fallback(GateVector& hard, const Tensor& p,
                                std::span<const std::size_t> lengths) {
  const std::size_t batch = lengths.size();
  const std::size_t steps = batch == 0 ? 0 : hard.size() / batch;
  auto pv = p.data();
  std::size_t events = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (lengths[b] == 0) continue;
    bool any_open = false;
    std::size_t best = 0;
    for (std::size_t t = 0; t < lengths[b]; ++t) {
      any_open = any_open || hard[b * steps + t] != 0;
      if (pv[b * steps + t] > pv[b * steps + best]) best = t;
    }
    if (!any_open) {
      hard[b * steps + best] = 1;
      ++events;
    }
  }
  return events;
}

AttentionOutput gated_attention(const AttentionScorer& scorer, const Tensor& states,
                                GateState& gates, std::span<const std::size_t> lengths,
                                GateApplication mode) {
  check_states("gated_attention", states, lengths);
  const std::size_t batch = states.dim(0);
  const std::size_t steps = states.dim(1);
  const Shape gate_shape{batch, steps};
  if (mode == GateApplication::soft) {
    if (!gates.soft.defined() || gates.soft.shape() != gate_shape) {
      throw ShapeError("gated_attention: soft gates must be " + to_string(gate_shape));
    }
    const Tensor weights = mul(gates.soft, validity_mask(batch, steps, lengths));
    return attend(scorer, states, weights, valid_positions(batch, steps, lengths));
  }

  if (gates.hard.size() != batch * steps) {
    throw ShapeError("gated_attention: hard gates must cover " + to_string(gate_shape));
  }
  std::size_t events = 0;
  if (gates.p.defined()) {
    events = apply_gate_fallback(gates.hard, gates.p, lengths);
  }
  std::vector<std::uint8_t> open(batch * steps, 0);
  Tensor weights(gate_shape);
  auto wv = weights.mutable_data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < lengths[b]; ++t) {
      const std::size_t i = b * steps + t;
      open[i] = gates.hard[i] != 0 ? 1 : 0;
      wv[i] = open[i] ? 1.0 : 0.0;
    }
  }
  AttentionOutput out = attend(scorer, states, weights, open);
  out.fallback_events = events;
  return out;
}

AttentionOutput local_attention(const AttentionScorer& scorer, const LocalPredictor& predictor,
                                const EncoderOutput& encoded,
                                std::span<const std::size_t> lengths,
                                const LocalAttentionOptions& options) {
  const Tensor& states = encoded.states;
  check_states("local_attention", states, lengths);
  if (options.window == 0) throw ContractError("local_attention: window must be >= 1");
  if (!encoded.summary.defined()) {
    throw ContractError("local_attention: encoder summary missing (empty sequence?)");
  }
  const std::size_t batch = states.dim(0);
  const std::size_t steps = states.dim(1);

  Tensor length_values(Shape{batch});
  for (std::size_t b = 0; b < batch; ++b) {
    length_values.mutable_data()[b] = static_cast<double>(lengths[b]);
  }
  const Tensor center = mul(predictor.center_fraction(encoded.summary), length_values);

  const double half = static_cast<double>(options.window) / 2.0;
  std::vector<std::uint8_t> in_window(batch * steps, 0);
  Tensor indicator(Shape{batch, steps});
  auto cv = center.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double lo = cv[b] - half;
    const double hi = cv[b] + half;
    bool any = false;
    for (std::size_t t = 0; t < lengths[b]; ++t) {
      const double pos = static_cast<double>(t);
      if (pos >= lo && pos <= hi) {
        in_window[b * steps + t] = 1;
        any = true;
      }
    }
    if (!any && lengths[b] > 0) {
      const double nearest = std::clamp(std::round(cv[b]), 0.0,
                                        static_cast<double>(lengths[b] - 1));
      in_window[b * steps + static_cast<std::size_t>(nearest)] = 1;
    }
  }
  for (std::size_t i = 0; i < in_window.size(); ++i) {
    indicator.mutable_data()[i] = in_window[i] ? 1.0 : 0.0;
  }

  Tensor weights = indicator;
  if (options.gaussian) {
    const double sigma = static_cast<double>(options.window) / 4.0;
    Tensor positions(Shape{batch, steps});
    auto pv = positions.mutable_data();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < steps; ++t) pv[b * steps + t] = static_cast<double>(t);
    }
    const Tensor offset = add_rows(positions, neg(center));
    const Tensor falloff = exp(scale(mul(offset, offset), -1.0 / (2.0 * sigma * sigma)));
    weights = mul(falloff, indicator);
  }
  return attend(scorer, states, weights, in_window);
}

}  // namespace gatedattn
