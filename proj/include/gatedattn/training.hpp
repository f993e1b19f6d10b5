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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gatedattn/data.hpp"
#include "gatedattn/instrumentation.hpp"
#include "gatedattn/layers.hpp"
#include "gatedattn/model.hpp"
#include "gatedattn/stochastic.hpp"

namespace gatedattn {

inline constexpr double kLearningRateGrid[] = {0.0001, 0.0002, 0.0005, 0.001, 0.002, 0.005, 0.01};
inline constexpr std::size_t kBatchSizeGrid[] = {8, 16, 32, 64, 128};
inline constexpr double kTauGrid[] = {0.5, 1.0, 1.5, 2.0};
inline constexpr double kLambdaGrid[] = {0.4e-5, 0.5e-5, 1.0e-5, 0.4e-4, 0.5e-4, 1.0e-4, 1.0e-3};

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 32;
  double tau = 1.0;
  double lambda = 1e-4;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  GateMode gate_mode = GateMode::threshold;  // validation gates
  std::size_t max_len = 400;
  double clip_norm = 5.0;
  // Permits learning_rate, batch_size, tau and lambda outside their grids.
  bool allow_off_grid = false;
  // Feeds the model p = value instead of the auxiliary output (A/B checks).
  std::optional<double> pinned_gate_probability;

  // Throws ConfigError naming the first off-grid field unless allowed.
  void validate() const;
};

// Mean over the batch of  -log yhat[label] + lambda * sum_t soft_t / T_b,
// with the sum over each example's valid positions and yhat clamped at 1e-12.
// gates may be null (no regulariser). Throws ContractError for a label >= K.
Tensor joint_loss(const Tensor& probabilities, std::span<const int> labels,
                  const GateState* gates, double lambda, std::span<const std::size_t> lengths);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  explicit AdamState(const ParameterList& params);

  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update from the parameters' gradient buffers
// (a parameter without a buffer counts as zero gradient). A non-finite
// gradient throws DivergenceError naming the parameter before anything moves.
void adam_step(const ParameterList& params, AdamState& state, double learning_rate);

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before scaling.
double clip_grad_norm(const ParameterList& params, double max_norm);

struct EvalOptions {
  GateMode gate_mode = GateMode::threshold;
  std::uint64_t seed = 0;  // sampled gates
  std::size_t batch_size = 64;
  std::size_t max_len = 400;
  std::optional<double> pinned_gate_probability;
};

struct EvalResult {
  std::size_t examples = 0;
  double accuracy = 0.0;
  double density = 1.0;
  FlopsReport flops;        // as run
  FlopsReport dense_flops;  // every valid position scored
  GateCounts gate_counts;   // against gold positions, when the data has them
  std::size_t fallback_events = 0;
  std::vector<int> predictions;  // in example order
};

// Hard gates per gate_mode. Batches run in parallel; results do not depend
// on the thread count.
EvalResult evaluate(const GatedAttentionModel& model, const std::vector<EncodedExample>& data,
                    const EvalOptions& options);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_acc = 0.0;
  double val_density = 0.0;
  double wall_ms = 0.0;
};

// "epoch=3 train_loss=0.412345678901 val_acc=0.9125 val_density=0.2500 wall_ms=812"
// Every field but wall_ms is a deterministic function of config and seed.
std::string format_epoch(const EpochRecord& record);
std::string format_epoch_metrics(const EpochRecord& record);  // without wall_ms

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when no epoch completed
  double best_val_acc = 0.0;
  double best_val_density = 1.0;
  bool diverged = false;
  std::string divergence;  // diagnostic when diverged
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Joint training of backbone and auxiliary network on relaxed gates. The model
// ends holding the parameters of the best validation epoch (accuracy, then
// lower density). A non-finite loss or gradient stops training with the model
// restored to the best epoch so far (or its initial state) and diverged set.
TrainReport train(GatedAttentionModel& model, const std::vector<EncodedExample>& train_data,
                  const std::vector<EncodedExample>& val_data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Snapshot of every state tensor; restore copies values back in place.
std::vector<std::vector<double>> snapshot(const GatedAttentionModel& model);
void restore(const GatedAttentionModel& model, const std::vector<std::vector<double>>& values);

}  // namespace gatedattn
