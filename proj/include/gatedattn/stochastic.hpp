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

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gatedattn/tensor.hpp"

namespace gatedattn {

// Seeded random source. One Rng per worker; derive() gives independent,
// reproducible sub-streams (e.g. one per batch).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double normal(double mean, double stddev);
  std::uint64_t next() { return engine_(); }
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  Rng derive(std::uint64_t stream) const;

  std::string state() const;
  void set_state(const std::string& state);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Mixes a seed with a stream index (seed xor index, then splitmix64).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// -log(-log(u)) with u clamped to [1e-12, 1 - 1e-12].
double gumbel_from_uniform(double u);
Tensor sample_gumbel(const Shape& shape, Rng& rng);

using GateVector = std::vector<std::uint8_t>;

// Independent draws with P(g_t = 1) = p_t. Throws ContractError for p outside [0, 1].
GateVector sample_bernoulli(const Tensor& p, Rng& rng);

enum class GateMode { sample, threshold };

// sample: Bernoulli(p_t); threshold: 1[p_t >= 0.5].
GateVector hard_gates(const Tensor& p, GateMode mode, Rng& rng);

// Gumbel(0, 1) noise for the closed (eps0) and open (eps1) components.
struct GumbelNoise {
  Tensor eps0;
  Tensor eps1;
};

GumbelNoise draw_gumbel_noise(const Shape& shape, Rng& rng);

// Per-position gate quantities for one batch. The relaxed closed-component is
// implicitly 1 - soft.
struct GateState {
  Tensor p;     // gate-open probabilities
  Tensor soft;  // relaxed open component in (0, 1), on the tape
  GateVector hard;
  double temperature = 1.0;
};

// Two-way Gumbel-Softmax relaxation of Bernoulli(p). p is clamped to
// [1e-6, 1 - 1e-6] first; the softmax is evaluated with the max logit
// subtracted. hard holds the argmax of each perturbed pair.
GateState gumbel_softmax_gate(const Tensor& p, double tau, Rng& rng);
GateState gumbel_softmax_gate(const Tensor& p, double tau, const GumbelNoise& noise);

}  // namespace gatedattn
