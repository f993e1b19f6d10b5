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
#include <optional>
#include <string>

#include "gatedattn/attention.hpp"
#include "gatedattn/batch.hpp"
#include "gatedattn/layers.hpp"
#include "gatedattn/stochastic.hpp"

namespace gatedattn {

enum class AttentionKind { soft, local, gated };

std::string to_string(AttentionKind kind);
AttentionKind parse_attention_kind(const std::string& name);

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 100;
  std::size_t hidden = 100;  // per direction; also the scorer width
  std::size_t layers = 2;
  std::size_t num_classes = 2;
  AttentionKind attention = AttentionKind::gated;
  AuxVariant aux_variant = AuxVariant::lstm;
  std::size_t aux_hidden = 100;
  std::size_t local_window = 8;
  bool local_gaussian = true;
  bool finetune_embeddings = false;
  std::uint64_t init_seed = 1;
};

struct ForwardOptions {
  // training: gates are the relaxed Gumbel-Softmax samples
  // otherwise: hard gates per gate_mode with the closed positions skipped
  bool training = false;
  double tau = 1.0;
  GateMode gate_mode = GateMode::threshold;
  Rng* rng = nullptr;                        // Gumbel noise / Bernoulli sampling
  const GumbelNoise* frozen_noise = nullptr;  // overrides rng in training mode
  std::optional<double> pinned_gate_probability;
};

struct ForwardResult {
  Tensor probabilities;  // [B x K]
  AttentionOutput attention;
  std::optional<GateState> gates;  // gated models only
};

// Backbone BiLSTM + attention classifier, with the auxiliary gate network when
// attention == gated.
class GatedAttentionModel {
 public:
  // embeddings: [vocab_size x embed_dim]. The backbone is initialised from
  // init_seed before any auxiliary parameters, so soft and gated models with
  // the same seed share their backbone weights.
  GatedAttentionModel(const ModelConfig& config, Tensor embeddings);

  ForwardResult forward(const SequenceBatch& batch, const ForwardOptions& options) const;

  // [B x T x E] embedding lookup; padding maps to the zero row.
  Tensor embed(const SequenceBatch& batch) const;

  const ModelConfig& config() const { return config_; }
  const Tensor& embeddings() const { return embeddings_; }

  // Trainable parameters in a fixed order.
  ParameterList parameters() const;
  // Everything persisted in a checkpoint: embeddings first, then parameters().
  ParameterList state() const;

  const BiLstmEncoder& encoder() const { return encoder_; }
  const AttentionScorer& scorer() const { return scorer_; }
  const ClassifierHead& classifier() const { return classifier_; }
  const AuxNetwork& aux() const { return aux_; }

 private:
  ModelConfig config_;
  Tensor embeddings_;
  BiLstmEncoder encoder_;
  AttentionScorer scorer_;
  ClassifierHead classifier_;
  LocalPredictor local_;
  AuxNetwork aux_;
};

}  // namespace gatedattn
