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

#include "gatedattn/model.hpp"

#include "gatedattn/errors.hpp"
#include "gatedattn/ops.hpp"

namespace gatedattn {

std::string to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::soft: return "soft";
    case AttentionKind::local: return "local";
    case AttentionKind::gated: return "gated";
  }
  return "gated";
}

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "soft") return AttentionKind::soft;
  if (name == "local") return AttentionKind::local;
  if (name == "gated") return AttentionKind::gated;
  throw ContractError("unknown attention kind '" + name + "'");
}

namespace {
constexpr std::uint64_t kAuxInitStream = 0xA5A5;
}

GatedAttentionModel::GatedAttentionModel(const ModelConfig& config, Tensor embeddings)
    : config_(config), embeddings_(embeddings.clone()) {
  if (embeddings_.rank() != 2 || embeddings_.dim(0) != config.vocab_size ||
      embeddings_.dim(1) != config.embed_dim) {
    throw ShapeError("model: embedding table " + to_string(embeddings_.shape()) +
                     " does not match vocab " + std::to_string(config.vocab_size) + " x dim " +
                     std::to_string(config.embed_dim));
  }
  embeddings_.set_requires_grad(config.finetune_embeddings);

  Rng rng(config.init_seed);
  encoder_ = BiLstmEncoder(config.embed_dim, config.hidden, config.layers, rng);
  scorer_ = AttentionScorer::init(encoder_.output_dim(), config.hidden, rng);
  classifier_ = ClassifierHead::init(encoder_.output_dim(), config.num_classes, rng);
  if (config.attention == AttentionKind::local) {
    local_ = LocalPredictor::init(encoder_.output_dim(), config.hidden, rng);
  }
  if (config.attention == AttentionKind::gated) {
    Rng aux_rng = rng.derive(kAuxInitStream);
    aux_ = AuxNetwork(config.aux_variant, config.embed_dim, config.aux_hidden, aux_rng);
  }
}

Tensor GatedAttentionModel::embed(const SequenceBatch& batch) const {
  for (std::size_t id : batch.ids) {
    if (id >= config_.vocab_size) {
      throw ContractError("embed: token id " + std::to_string(id) + " outside vocabulary of " +
                          std::to_string(config_.vocab_size));
    }
  }
  const Tensor rows = gather_rows(embeddings_, batch.ids);
  return reshape(rows, {batch.batch_size, batch.max_len, config_.embed_dim});
}

ForwardResult GatedAttentionModel::forward(const SequenceBatch& batch,
                                           const ForwardOptions& options) const {
  const Tensor embedded = embed(batch);
  const EncoderOutput encoded = encoder_.encode(embedded, batch.lengths);
  ForwardResult result;
  switch (config_.attention) {
    case AttentionKind::soft:
      result.attention = soft_attention(scorer_, encoded.states, batch.lengths);
      break;
    case AttentionKind::local:
      result.attention = local_attention(scorer_, local_, encoded, batch.lengths,
                                         {config_.local_window, config_.local_gaussian});
      break;
    case AttentionKind::gated: {
      Tensor p;
      if (options.pinned_gate_probability) {
        p = mul(Tensor(Shape{batch.batch_size, batch.max_len}, *options.pinned_gate_probability),
                validity_mask(batch.batch_size, batch.max_len, batch.lengths));
      } else {
        p = aux_.probabilities(embedded, batch.lengths);
      }
      GateState gates;
      if (options.training) {
        if (options.frozen_noise != nullptr) {
          gates = gumbel_softmax_gate(p, options.tau, *options.frozen_noise);
        } else {
          if (options.rng == nullptr) throw ContractError("forward: training needs an rng");
          gates = gumbel_softmax_gate(p, options.tau, *options.rng);
        }
        result.attention =
            gated_attention(scorer_, encoded.states, gates, batch.lengths, GateApplication::soft);
      } else {
        gates.p = p;
        gates.temperature = options.tau;
        if (options.gate_mode == GateMode::sample) {
          if (options.rng == nullptr) throw ContractError("forward: sampled gates need an rng");
          gates.hard = hard_gates(p, GateMode::sample, *options.rng);
        } else {
          Rng unused(0);
          gates.hard = hard_gates(p, GateMode::threshold, unused);
        }
        result.attention =
            gated_attention(scorer_, encoded.states, gates, batch.lengths, GateApplication::hard);
      }
      result.gates = std::move(gates);
      break;
    }
  }
  result.probabilities = classifier_.probabilities(result.attention.context);
  return result;
}

ParameterList GatedAttentionModel::parameters() const {
  ParameterList out;
  if (config_.finetune_embeddings) out.push_back({"embedding", embeddings_});
  encoder_.collect("encoder", out);
  scorer_.collect("scorer", out);
  classifier_.collect("classifier", out);
  if (config_.attention == AttentionKind::local) local_.collect("local", out);
  if (config_.attention == AttentionKind::gated) aux_.collect("aux", out);
  return out;
}

ParameterList GatedAttentionModel::state() const {
  ParameterList out;
  out.push_back({"embedding", embeddings_});
  for (auto& p : parameters()) {
    if (p.name != "embedding") out.push_back(std::move(p));
  }
  return out;
}

}  // namespace gatedattn
