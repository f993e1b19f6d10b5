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

#include "gatedattn/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gatedattn/errors.hpp"
#include "gatedattn/ops.hpp"

namespace gatedattn {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = (seed ^ stream) + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal(double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  return dist(engine_);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw ContractError("rng: below(0)");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

Rng Rng::derive(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

std::string Rng::state() const {
  std::ostringstream out;
  out << seed_ << ' ' << engine_;
  return out.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream in(state);
  in >> seed_ >> engine_;
  if (!in) throw ParseError("rng: malformed state");
}

double gumbel_from_uniform(double u) {
  const double clamped = std::clamp(u, 1e-12, 1.0 - 1e-12);
  return -std::log(-std::log(clamped));
}

Tensor sample_gumbel(const Shape& shape, Rng& rng) {
  Tensor out(shape);
  for (double& v : out.mutable_data()) v = gumbel_from_uniform(rng.uniform());
  return out;
}

GateVector sample_bernoulli(const Tensor& p, Rng& rng) {
  GateVector gates(p.size());
  auto pv = p.data();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (!(pv[i] >= 0.0 && pv[i] <= 1.0)) {
      throw ContractError("sample_bernoulli: probability " + std::to_string(pv[i]) +
                          " at index " + std::to_string(i) + " outside [0, 1]");
    }
    // uniform() < 1 always, so p = 1 opens and p = 0 never does
    gates[i] = rng.uniform() < pv[i] ? 1 : 0;
  }
  return gates;
}

GateVector hard_gates(const Tensor& p, GateMode mode, Rng& rng) {
  if (mode == GateMode::sample) return sample_bernoulli(p, rng);
  GateVector gates(p.size());
  auto pv = p.data();
  for (std::size_t i = 0; i < pv.size(); ++i) gates[i] = pv[i] >= 0.5 ? 1 : 0;
  return gates;
}

GumbelNoise draw_gumbel_noise(const Shape& shape, Rng& rng) {
  GumbelNoise noise{Tensor(shape), Tensor(shape)};
  auto e0 = noise.eps0.mutable_data();
  auto e1 = noise.eps1.mutable_data();
  // interleaved so position t always consumes the same pair of draws
  for (std::size_t i = 0; i < e0.size(); ++i) {
    e0[i] = gumbel_from_uniform(rng.uniform());
    e1[i] = gumbel_from_uniform(rng.uniform());
  }
  return noise;
}

GateState gumbel_softmax_gate(const Tensor& p, double tau, Rng& rng) {
  return gumbel_softmax_gate(p, tau, draw_gumbel_noise(p.shape(), rng));
}

GateState gumbel_softmax_gate(const Tensor& p, double tau, const GumbelNoise& noise) {
  if (!(tau > 0.0)) throw ContractError("gumbel_softmax_gate: tau must be > 0");
  if (noise.eps0.shape() != p.shape() || noise.eps1.shape() != p.shape()) {
    throw ShapeError("gumbel_softmax_gate: noise shape does not match " + to_string(p.shape()));
  }
  const Tensor clamped = clamp(p, 1e-6, 1.0 - 1e-6);
  const Tensor log_open = log(clamped);
  const Tensor log_closed = log(add_scalar(neg(clamped), 1.0));
  const Tensor logit_open = scale(add(log_open, noise.eps1), 1.0 / tau);
  const Tensor logit_closed = scale(add(log_closed, noise.eps0), 1.0 / tau);

  Tensor shift(p.shape());
  GateVector hard(p.size());
  {
    auto s = shift.mutable_data();
    auto a1 = logit_open.data();
    auto a0 = logit_closed.data();
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::max(a0[i], a1[i]);
      hard[i] = a1[i] > a0[i] ? 1 : 0;
    }
  }
  const Tensor z_open = exp(sub(logit_open, shift));
  const Tensor z_closed = exp(sub(logit_closed, shift));
  GateState state;
  state.p = p;
  state.soft = div(z_open, add(z_closed, z_open));
  state.hard = std::move(hard);
  state.temperature = tau;
  return state;
}

}  // namespace gatedattn
