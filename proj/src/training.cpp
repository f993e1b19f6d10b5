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

#include "gatedattn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <type_traits>

#include <fmt/format.h>

#include "gatedattn/errors.hpp"
#include "gatedattn/kernels.hpp"
#include "gatedattn/ops.hpp"

namespace gatedattn {

namespace {

constexpr double kLogFloor = 1e-12;
constexpr std::uint64_t kShuffleStream = 0x5u;
constexpr std::uint64_t kNoiseStream = 0x6u;
constexpr std::uint64_t kValidationStream = 0x7u;

template <typename T, std::size_t N>
bool on_grid(T value, const T (&grid)[N]) {
  for (T g : grid) {
    if constexpr (std::is_floating_point_v<T>) {
      if (std::abs(value - g) <= 1e-12 * std::abs(g)) return true;
    } else if (value == g) {
      return true;
    }
  }
  return false;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (max_len == 0) throw ConfigError("max_len must be positive");
  if (allow_off_grid) return;
  if (!on_grid(learning_rate, kLearningRateGrid)) {
    throw ConfigError(fmt::format("learning_rate={} is off-grid (set allow_off_grid=true)", learning_rate));
  }
  if (!on_grid(batch_size, kBatchSizeGrid)) {
    throw ConfigError(fmt::format("batch_size={} is off-grid (set allow_off_grid=true)", batch_size));
  }
  if (!on_grid(tau, kTauGrid)) {
    throw ConfigError(fmt::format("tau={} is off-grid (set allow_off_grid=true)", tau));
  }
  if (!on_grid(lambda, kLambdaGrid)) {
    throw ConfigError(fmt::format("lambda={} is off-grid (set allow_off_grid=true)", lambda));
  }
}

Tensor joint_loss(const Tensor& probabilities, std::span<const int> labels,
                  const GateState* gates, double lambda, std::span<const std::size_t> lengths) {
  if (probabilities.rank() != 2 || probabilities.dim(0) != labels.size()) {
    throw ShapeError("joint_loss: probabilities " + to_string(probabilities.shape()) +
                     " do not match " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = probabilities.dim(0);
  const std::size_t classes = probabilities.dim(1);
  Tensor onehot(Shape{batch, classes});
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes) {
      throw ContractError(fmt::format("joint_loss: label {} outside [0, {})", labels[b], classes));
    }
    onehot.mutable_data()[b * classes + static_cast<std::size_t>(labels[b])] = 1.0;
  }
  Tensor per_example = neg(sum_last(mul(log(clamp(probabilities, kLogFloor, 1.0)), onehot)));
  if (gates != nullptr && lambda != 0.0) {
    const Tensor& soft = gates->soft;
    if (soft.rank() != 2 || soft.dim(0) != batch || lengths.size() != batch) {
      throw ShapeError("joint_loss: gates " + to_string(soft.shape()) + " do not match the batch");
    }
    const std::size_t max_len = soft.dim(1);
    Tensor inv_len(Shape{batch});
    for (std::size_t b = 0; b < batch; ++b) {
      if (lengths[b] == 0) throw ContractError("joint_loss: empty example");
      inv_len.mutable_data()[b] = lambda / static_cast<double>(lengths[b]);
    }
    const Tensor l1 = sum_last(mul(soft, validity_mask(batch, max_len, lengths)));
    per_example = add(per_example, mul(l1, inv_len));
  }
  return mean(per_example);
}

AdamState::AdamState(const ParameterList& params) {
  for (const auto& p : params) {
    m.emplace_back(p.value.size(), 0.0);
    v.emplace_back(p.value.size(), 0.0);
  }
}

void adam_step(const ParameterList& params, AdamState& state, double learning_rate) {
  if (params.size() != state.m.size()) {
    throw ContractError("adam_step: optimizer state does not match the parameter list");
  }
  for (const auto& p : params) {
    for (double g : p.value.grad()) {
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in parameter " + p.name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto grad = params[i].value.grad();
    if (grad.empty()) continue;
    auto w = params[i].value.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = AdamState::kBeta1 * m[j] + (1.0 - AdamState::kBeta1) * grad[j];
      v[j] = AdamState::kBeta2 * v[j] + (1.0 - AdamState::kBeta2) * grad[j] * grad[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + AdamState::kEpsilon);
    }
  }
}

double clip_grad_norm(const ParameterList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.value.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && std::isfinite(norm)) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      if (p.value.grad().empty()) continue;
      for (double& g : p.value.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

namespace {

struct BatchOutcome {
  std::size_t correct = 0;
  std::size_t open = 0;
  std::size_t valid = 0;
  std::size_t fallback = 0;
  FlopsReport flops;
  FlopsReport dense;
  GateCounts counts;
  std::vector<std::pair<std::size_t, int>> predictions;
};

BatchOutcome evaluate_batch(const GatedAttentionModel& model, const SequenceBatch& batch,
                            const std::vector<EncodedExample>& data, const EvalOptions& options,
                            std::uint64_t batch_seed) {
  Rng rng(batch_seed);
  ForwardOptions fo;
  fo.training = false;
  fo.gate_mode = options.gate_mode;
  fo.rng = &rng;
  fo.pinned_gate_probability = options.pinned_gate_probability;
  const ForwardResult r = model.forward(batch, fo);

  const ModelConfig& cfg = model.config();
  const std::size_t classes = r.probabilities.dim(1);
  const std::size_t states_dim = 2 * cfg.hidden;
  BatchOutcome out;
  out.fallback = r.attention.fallback_events;
  std::vector<std::uint8_t> row;
  for (std::size_t b = 0; b < batch.batch_size; ++b) {
    const auto probs = r.probabilities.data().subspan(b * classes, classes);
    const int predicted = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    out.correct += predicted == batch.labels[b];
    out.predictions.emplace_back(batch.example_index[b], predicted);

    const std::size_t len = batch.lengths[b];
    row.assign(len, 1);
    if (r.gates) {
      std::copy_n(r.gates->hard.begin() + static_cast<std::ptrdiff_t>(b * batch.max_len), len,
                  row.begin());
    } else if (cfg.attention == AttentionKind::local) {
      for (std::size_t t = 0; t < len; ++t) row[t] = r.attention.alpha[b * batch.max_len + t] != 0.0;
    }
    std::size_t open = 0;
    for (auto g : row) open += g;
    out.open += open;
    out.valid += len;
    out.flops += count_attention_flops(open, len, states_dim, cfg.hidden);
    out.dense += count_attention_flops(len, len, states_dim, cfg.hidden);
    const auto& gold = data[batch.example_index[b]].gold;
    if (!gold.empty()) out.counts += count_gate_hits(row, gold);
  }
  return out;
}

}  // namespace

EvalResult evaluate(const GatedAttentionModel& model, const std::vector<EncodedExample>& data,
                    const EvalOptions& options) {
  EvalResult result;
  result.examples = data.size();
  if (data.empty()) return result;
  const auto batches = make_batches(data, options.batch_size, options.max_len);
  std::vector<BatchOutcome> outcomes(batches.size());
  std::exception_ptr failure;
  const auto count = static_cast<std::ptrdiff_t>(batches.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::num_threads())
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      outcomes[idx] = evaluate_batch(model, batches[idx], data, options, mix_seed(options.seed, idx));
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  result.predictions.assign(data.size(), -1);
  std::size_t correct = 0, open = 0, valid = 0;
  for (const auto& o : outcomes) {
    correct += o.correct;
    open += o.open;
    valid += o.valid;
    result.fallback_events += o.fallback;
    result.flops += o.flops;
    result.dense_flops += o.dense;
    result.gate_counts += o.counts;
    for (const auto& [index, predicted] : o.predictions) result.predictions[index] = predicted;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  result.density = valid == 0 ? 0.0 : static_cast<double>(open) / static_cast<double>(valid);
  return result;
}

std::string format_epoch_metrics(const EpochRecord& r) {
  return fmt::format("epoch={} train_loss={:.12f} val_acc={:.6f} val_density={:.6f}", r.epoch,
                     r.train_loss, r.val_acc, r.val_density);
}

std::string format_epoch(const EpochRecord& r) {
  return fmt::format("{} wall_ms={:.0f}", format_epoch_metrics(r), r.wall_ms);
}

std::vector<std::vector<double>> snapshot(const GatedAttentionModel& model) {
  std::vector<std::vector<double>> out;
  for (const auto& p : model.state()) out.emplace_back(p.value.data().begin(), p.value.data().end());
  return out;
}

void restore(const GatedAttentionModel& model, const std::vector<std::vector<double>>& values) {
  const ParameterList state = model.state();
  if (state.size() != values.size()) throw ContractError("restore: snapshot does not match the model");
  for (std::size_t i = 0; i < state.size(); ++i) {
    auto dst = state[i].value.mutable_data();
    if (dst.size() != values[i].size()) throw ContractError("restore: size mismatch for " + state[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

TrainReport train(GatedAttentionModel& model, const std::vector<EncodedExample>& train_data,
                  const std::vector<EncodedExample>& val_data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_data.empty()) throw ContractError("train: empty training set");
  if (val_data.empty()) throw ContractError("train: empty validation set");
  const ParameterList params = model.parameters();
  AdamState adam(params);
  const bool gated = model.config().attention == AttentionKind::gated;

  EvalOptions eval_options;
  eval_options.gate_mode = config.gate_mode;
  eval_options.seed = mix_seed(config.seed, kValidationStream);
  eval_options.max_len = config.max_len;
  eval_options.pinned_gate_probability = config.pinned_gate_probability;

  TrainReport report;
  auto best = snapshot(model);
  bool have_best = false;
  using Clock = std::chrono::steady_clock;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = Clock::now();
    const std::uint64_t epoch_seed = mix_seed(config.seed, epoch);
    const auto batches = make_batches(train_data, config.batch_size, config.max_len,
                                      mix_seed(epoch_seed, kShuffleStream));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    try {
      for (std::size_t bi = 0; bi < batches.size(); ++bi) {
        const SequenceBatch& batch = batches[bi];
        for (const auto& p : params) p.value.zero_grad();
        Rng rng(mix_seed(mix_seed(epoch_seed, kNoiseStream), bi));
        Tape tape;
        TapeScope scope(tape);
        ForwardOptions fo;
        fo.training = true;
        fo.tau = config.tau;
        fo.rng = &rng;
        fo.pinned_gate_probability = config.pinned_gate_probability;
        const ForwardResult r = model.forward(batch, fo);
        const Tensor loss = joint_loss(r.probabilities, batch.labels,
                                       gated ? &*r.gates : nullptr, config.lambda, batch.lengths);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw DivergenceError(fmt::format("non-finite loss at epoch {} batch {}", epoch, bi));
        }
        backward(loss);
        clip_grad_norm(params, config.clip_norm);
        adam_step(params, adam, config.learning_rate);
        loss_sum += value * static_cast<double>(batch.batch_size);
        seen += batch.batch_size;
      }
    } catch (const DivergenceError& e) {
      report.diverged = true;
      report.divergence = e.what();
      restore(model, best);
      return report;
    }

    const EvalResult val = evaluate(model, val_data, eval_options);
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(seen);
    record.val_acc = val.accuracy;
    record.val_density = val.density;
    record.wall_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    report.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    const bool better = !have_best || val.accuracy > report.best_val_acc ||
                        (val.accuracy == report.best_val_acc && val.density < report.best_val_density);
    if (better) {
      have_best = true;
      best = snapshot(model);
      report.best_epoch = epoch;
      report.best_val_acc = val.accuracy;
      report.best_val_density = val.density;
    }
  }
  restore(model, best);
  return report;
}

}  // namespace gatedattn
