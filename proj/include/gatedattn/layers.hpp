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
#include <string>
#include <vector>

#include "gatedattn/stochastic.hpp"
#include "gatedattn/tensor.hpp"

namespace gatedattn {

struct NamedParameter {
  std::string name;
  Tensor value;
};
using ParameterList = std::vector<NamedParameter>;

// Weights uniform in [-limit, limit], marked trainable.
Tensor uniform_parameter(Shape shape, double limit, Rng& rng);

inline constexpr double kInitRange = 0.08;

// Gate blocks are stacked along the columns in the order input, forget,
// candidate, output.
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor w_input;   // [input_dim x 4H]
  Tensor w_hidden;  // [H x 4H]
  Tensor bias;      // [4H], forget block initialised to 1

  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct LstmState {
  Tensor h;  // [B x H]
  Tensor c;  // [B x H]
};

// One step of the standard LSTM recurrence for a [B x input_dim] input.
LstmState lstm_step(const LstmParams& params, const LstmState& prev, const Tensor& x);

struct BiLstmLayer {
  LstmParams forward;
  LstmParams backward;
};

struct EncoderOutput {
  Tensor states;   // [B x T x 2H], zero at padded positions
  Tensor summary;  // [B x 2H]: forward state at the last valid step, backward state at step 0
};

// Stacked bidirectional LSTM over variable-length, right-padded batches.
// Each direction only runs over valid positions, so padding never reaches a
// valid output. The next layer reads the concatenated directions.
class BiLstmEncoder {
 public:
  BiLstmEncoder() = default;
  BiLstmEncoder(std::size_t input_dim, std::size_t hidden_dim, std::size_t layers, Rng& rng);

  // inputs: [B x T x input_dim]. Throws ContractError on a zero length unless
  // allow_empty, in which case that row yields zeros and the summary is left
  // undefined.
  EncoderOutput encode(const Tensor& inputs, std::span<const std::size_t> lengths,
                       bool allow_empty = false) const;

  std::size_t hidden_dim() const { return hidden_dim_; }
  std::size_t output_dim() const { return 2 * hidden_dim_; }
  std::size_t num_layers() const { return layers_.size(); }
  const std::vector<BiLstmLayer>& layers() const { return layers_; }
  std::vector<BiLstmLayer>& layers() { return layers_; }

  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  std::size_t hidden_dim_ = 0;
  std::vector<BiLstmLayer> layers_;
};

// e_t = v . tanh(W h_t + b), one scalar per row.
struct AttentionScorer {
  Tensor w;  // [D x Hs]
  Tensor b;  // [Hs]
  Tensor v;  // [Hs x 1]

  static AttentionScorer init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  Tensor score(const Tensor& rows) const;  // [N x D] -> [N x 1]
  std::size_t input_dim() const { return w.dim(0); }
  std::size_t hidden_dim() const { return w.dim(1); }
  void collect(const std::string& prefix, ParameterList& out) const;
};

// Fraction of the sequence length at which local attention centres:
// sigmoid(v . tanh(W s)) for the encoder summary s.
struct LocalPredictor {
  Tensor w;  // [D x Hs]
  Tensor v;  // [Hs x 1]

  static LocalPredictor init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  Tensor center_fraction(const Tensor& summary) const;  // [B x D] -> [B]
  void collect(const std::string& prefix, ParameterList& out) const;
};

// Affine map to K logits followed by softmax.
struct ClassifierHead {
  Tensor w;  // [D x K]
  Tensor b;  // [K]

  static ClassifierHead init(std::size_t input_dim, std::size_t classes, Rng& rng);
  Tensor logits(const Tensor& context) const;
  Tensor probabilities(const Tensor& context) const;
  std::size_t num_classes() const { return w.dim(1); }
  void collect(const std::string& prefix, ParameterList& out) const;
};

enum class AuxVariant { lstm, ffn, self_attention };

std::string to_string(AuxVariant variant);
AuxVariant parse_aux_variant(const std::string& name);

// Small side network reading the shared word embeddings and emitting one
// gate-open probability per position, sigmoid(U h'_t). Padding gets p = 0.
class AuxNetwork {
 public:
  AuxNetwork() = default;
  AuxNetwork(AuxVariant variant, std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  // embedded: [B x T x E] -> [B x T]
  Tensor probabilities(const Tensor& embedded, std::span<const std::size_t> lengths) const;

  AuxVariant variant() const { return variant_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  const Tensor& projection() const { return u_; }
  Tensor& projection() { return u_; }

  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  AuxVariant variant_ = AuxVariant::lstm;
  std::size_t hidden_dim_ = 0;
  BiLstmEncoder lstm_;
  Tensor ffn_w_, ffn_b_;
  Tensor query_, key_, value_;
  Tensor u_;
};

// [B x T] of 1.0 at valid positions, 0.0 at padding.
Tensor validity_mask(std::size_t batch, std::size_t steps, std::span<const std::size_t> lengths);

}  // namespace gatedattn
