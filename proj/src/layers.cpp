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

#include "gatedattn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "gatedattn/errors.hpp"
#include "gatedattn/ops.hpp"

namespace gatedattn {

Tensor uniform_parameter(Shape shape, double limit, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.mutable_data()) v = (2.0 * rng.uniform() - 1.0) * limit;
  t.set_requires_grad(true);
  return t;
}

Tensor validity_mask(std::size_t batch, std::size_t steps, std::span<const std::size_t> lengths) {
  Tensor mask(Shape{batch, steps});
  auto m = mask.mutable_data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < std::min(lengths[b], steps); ++t) m[b * steps + t] = 1.0;
  }
  return mask;
}

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.w_input = uniform_parameter({input_dim, 4 * hidden_dim}, kInitRange, rng);
  p.w_hidden = uniform_parameter({hidden_dim, 4 * hidden_dim}, kInitRange, rng);
  p.bias = uniform_parameter({4 * hidden_dim}, kInitRange, rng);
  auto b = p.bias.mutable_data();
  std::fill(b.begin() + static_cast<std::ptrdiff_t>(hidden_dim),
            b.begin() + static_cast<std::ptrdiff_t>(2 * hidden_dim), 1.0);
  return p;
}

void LstmParams::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".w_input", w_input});
  out.push_back({prefix + ".w_hidden", w_hidden});
  out.push_back({prefix + ".bias", bias});
}

namespace {

// Runs one direction and returns the per-step outputs [B x 1 x H] in time order.
// projected: [B x T x 4H] input projection plus bias.
std::vector<Tensor> run_direction(const LstmParams& params, const Tensor& projected,
                                  std::span<const std::size_t> lengths, bool reverse) {
  const std::size_t batch = projected.dim(0);
  const std::size_t steps = projected.dim(1);
  const std::size_t h = params.hidden_dim;
  Tensor hc(Shape{batch, 2 * h});
  Tensor hidden(Shape{batch, h});
  std::vector<Tensor> outputs(steps);
  std::vector<std::uint8_t> keep(batch);
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t t = reverse ? steps - 1 - i : i;
    for (std::size_t b = 0; b < batch; ++b) keep[b] = t < lengths[b];
    hc = lstm_cell(projected, t, matmul(hidden, params.w_hidden), hc, keep);
    hidden = slice(hc, 1, 0, h);
    outputs[t] = reshape(hidden, {batch, 1, h});
  }
  return outputs;
}

}  // namespace

LstmState lstm_step(const LstmParams& params, const LstmState& prev, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != params.input_dim) {
    throw ShapeError("lstm_step: input " + to_string(x.shape()) + " does not match input_dim " +
                     std::to_string(params.input_dim));
  }
  if (prev.h.shape() != Shape{x.dim(0), params.hidden_dim} || prev.c.shape() != prev.h.shape()) {
    throw ShapeError("lstm_step: state " + to_string(prev.h.shape()) + " does not match hidden " +
                     std::to_string(params.hidden_dim));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t h = params.hidden_dim;
  const Tensor projected =
      reshape(add(matmul(x, params.w_input), params.bias), {batch, 1, 4 * h});
  const Tensor parts[2] = {prev.h, prev.c};
  const Tensor hc = lstm_cell(projected, 0, matmul(prev.h, params.w_hidden), concat(parts, 1),
                              std::vector<std::uint8_t>(batch, 1));
  return {slice(hc, 1, 0, h), slice(hc, 1, h, 2 * h)};
}

BiLstmEncoder::BiLstmEncoder(std::size_t input_dim, std::size_t hidden_dim, std::size_t layers,
                             Rng& rng)
    : hidden_dim_(hidden_dim) {
  if (layers == 0) throw ContractError("bilstm: at least one layer required");
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < layers; ++l) {
    BiLstmLayer layer;
    layer.forward = LstmParams::init(in, hidden_dim, rng);
    layer.backward = LstmParams::init(in, hidden_dim, rng);
    layers_.push_back(std::move(layer));
    in = 2 * hidden_dim;
  }
}

EncoderOutput BiLstmEncoder::encode(const Tensor& inputs, std::span<const std::size_t> lengths,
                                    bool allow_empty) const {
  if (inputs.rank() != 3) {
    throw ShapeError("bilstm: expected [B x T x E] input, got " + to_string(inputs.shape()));
  }
  const std::size_t batch = inputs.dim(0);
  const std::size_t steps = inputs.dim(1);
  if (lengths.size() != batch) throw ShapeError("bilstm: lengths do not match batch size");
  bool any_empty = false;
  for (std::size_t len : lengths) {
    if (len > steps) throw ContractError("bilstm: length exceeds padded width");
    any_empty = any_empty || len == 0;
  }
  if (any_empty && !allow_empty) throw ContractError("bilstm: empty sequence in batch");

  Tensor x = inputs;
  for (const BiLstmLayer& layer : layers_) {
    const Tensor fwd_proj = add(matmul(x, layer.forward.w_input), layer.forward.bias);
    const Tensor bwd_proj = add(matmul(x, layer.backward.w_input), layer.backward.bias);
    const std::vector<Tensor> fwd = run_direction(layer.forward, fwd_proj, lengths, false);
    const std::vector<Tensor> bwd = run_direction(layer.backward, bwd_proj, lengths, true);
    const Tensor parts[2] = {concat(fwd, 1), concat(bwd, 1)};
    x = concat(parts, 2);
  }

  EncoderOutput out;
  out.states = x;
  if (!any_empty) {
    const std::size_t width = output_dim();
    const Tensor flat = reshape(x, {batch * steps, width});
    std::vector<std::size_t> last_rows(batch), first_rows(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      last_rows[b] = b * steps + lengths[b] - 1;
      first_rows[b] = b * steps;
    }
    const Tensor parts[2] = {slice(gather_rows(flat, last_rows), 1, 0, hidden_dim_),
                             slice(gather_rows(flat, first_rows), 1, hidden_dim_, width)};
    out.summary = concat(parts, 1);
  }
  return out;
}

void BiLstmEncoder::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string base = prefix + ".layer" + std::to_string(l);
    layers_[l].forward.collect(base + ".fwd", out);
    layers_[l].backward.collect(base + ".bwd", out);
  }
}

AttentionScorer AttentionScorer::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  AttentionScorer s;
  s.w = uniform_parameter({input_dim, hidden_dim}, kInitRange, rng);
  s.b = uniform_parameter({hidden_dim}, kInitRange, rng);
  s.v = uniform_parameter({hidden_dim, 1}, kInitRange, rng);
  return s;
}

Tensor AttentionScorer::score(const Tensor& rows) const {
  return matmul(tanh(add(matmul(rows, w), b)), v);
}

void AttentionScorer::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
  out.push_back({prefix + ".v", v});
}

LocalPredictor LocalPredictor::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LocalPredictor p;
  p.w = uniform_parameter({input_dim, hidden_dim}, kInitRange, rng);
  p.v = uniform_parameter({hidden_dim, 1}, kInitRange, rng);
  return p;
}

Tensor LocalPredictor::center_fraction(const Tensor& summary) const {
  const Tensor logit = matmul(tanh(matmul(summary, w)), v);
  return sigmoid(reshape(logit, {summary.dim(0)}));
}

void LocalPredictor::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".v", v});
}

ClassifierHead ClassifierHead::init(std::size_t input_dim, std::size_t classes, Rng& rng) {
  if (classes < 2) throw ContractError("classifier: need at least 2 classes");
  ClassifierHead head;
  head.w = uniform_parameter({input_dim, classes}, kInitRange, rng);
  head.b = uniform_parameter({classes}, kInitRange, rng);
  return head;
}

Tensor ClassifierHead::logits(const Tensor& context) const {
  if (context.rank() != 2 || context.dim(1) != w.dim(0)) {
    throw ShapeError("classifier: context " + to_string(context.shape()) +
                     " does not match input dim " + std::to_string(w.dim(0)));
  }
  return add(matmul(context, w), b);
}

Tensor ClassifierHead::probabilities(const Tensor& context) const {
  return softmax_rows(logits(context));
}

void ClassifierHead::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

std::string to_string(AuxVariant variant) {
  switch (variant) {
    case AuxVariant::lstm: return "lstm";
    case AuxVariant::ffn: return "ffn";
    case AuxVariant::self_attention: return "self_attention";
  }
  return "lstm";
}

AuxVariant parse_aux_variant(const std::string& name) {
  if (name == "lstm") return AuxVariant::lstm;
  if (name == "ffn") return AuxVariant::ffn;
  if (name == "self_attention") return AuxVariant::self_attention;
  throw ContractError("unknown aux variant '" + name + "'");
}

AuxNetwork::AuxNetwork(AuxVariant variant, std::size_t input_dim, std::size_t hidden_dim,
                       Rng& rng)
    : variant_(variant), hidden_dim_(hidden_dim) {
  std::size_t feature_dim = hidden_dim;
  switch (variant) {
    case AuxVariant::lstm:
      lstm_ = BiLstmEncoder(input_dim, hidden_dim, 1, rng);
      feature_dim = 2 * hidden_dim;
      break;
    case AuxVariant::ffn:
      ffn_w_ = uniform_parameter({input_dim, hidden_dim}, kInitRange, rng);
      ffn_b_ = uniform_parameter({hidden_dim}, kInitRange, rng);
      break;
    case AuxVariant::self_attention:
      query_ = uniform_parameter({input_dim, hidden_dim}, kInitRange, rng);
      key_ = uniform_parameter({input_dim, hidden_dim}, kInitRange, rng);
      value_ = uniform_parameter({input_dim, hidden_dim}, kInitRange, rng);
      break;
  }
  u_ = uniform_parameter({feature_dim, 1}, kInitRange, rng);
}

Tensor AuxNetwork::probabilities(const Tensor& embedded,
                                 std::span<const std::size_t> lengths) const {
  const std::size_t batch = embedded.dim(0);
  const std::size_t steps = embedded.dim(1);
  Tensor features;
  switch (variant_) {
    case AuxVariant::lstm:
      features = lstm_.encode(embedded, lengths, /*allow_empty=*/true).states;
      break;
    case AuxVariant::ffn:
      features = tanh(add(matmul(embedded, ffn_w_), ffn_b_));
      break;
    case AuxVariant::self_attention: {
      const Tensor q = matmul(embedded, query_);
      const Tensor k = matmul(embedded, key_);
      const Tensor v = matmul(embedded, value_);
      const Tensor scores =
          scale(matmul(q, transpose_last2(k)), 1.0 / std::sqrt(static_cast<double>(hidden_dim_)));
      // every query attends over the valid keys of its row; an all-padding row
      // attends uniformly and is zeroed by the mask below
      Tensor key_weights(Shape{batch * steps, steps});
      auto kw = key_weights.mutable_data();
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t limit = lengths[b] == 0 ? steps : lengths[b];
        for (std::size_t q_pos = 0; q_pos < steps; ++q_pos) {
          for (std::size_t t = 0; t < limit; ++t) kw[(b * steps + q_pos) * steps + t] = 1.0;
        }
      }
      const Tensor weights = weighted_softmax(reshape(scores, {batch * steps, steps}), key_weights);
      features = matmul(reshape(weights, {batch, steps, steps}), v);
      break;
    }
  }
  const Tensor logits = reshape(matmul(features, u_), {batch, steps});
  return mul(sigmoid(logits), validity_mask(batch, steps, lengths));
}

void AuxNetwork::collect(const std::string& prefix, ParameterList& out) const {
  switch (variant_) {
    case AuxVariant::lstm:
      lstm_.collect(prefix + ".lstm", out);
      break;
    case AuxVariant::ffn:
      out.push_back({prefix + ".ffn.w", ffn_w_});
      out.push_back({prefix + ".ffn.b", ffn_b_});
      break;
    case AuxVariant::self_attention:
      out.push_back({prefix + ".attn.query", query_});
      out.push_back({prefix + ".attn.key", key_});
      out.push_back({prefix + ".attn.value", value_});
      break;
  }
  out.push_back({prefix + ".u", u_});
}

}  // namespace gatedattn
