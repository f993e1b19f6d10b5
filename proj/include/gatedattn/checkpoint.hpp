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
#include <string>
#include <vector>

#include "gatedattn/layers.hpp"
#include "gatedattn/tensor.hpp"

namespace gatedattn {

// Binary layout, all integers little-endian:
//   magic "GATNCKPT" | u32 version | str config | u64 count
//   count x (str name | u64 rank | rank x u64 dim | numel x f64)
//   str rng_state
// where str = u64 byte length followed by the bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config;  // config echo, "key=value" lines
  std::vector<NamedParameter> tensors;
  std::string rng_state;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);

// Throws ParseError for a bad magic, unknown version or truncated file.
Checkpoint load_checkpoint(const std::string& path);

// Copies values into `state` by name. Throws ContractError if a name is
// missing or a shape differs.
void apply_checkpoint(const Checkpoint& checkpoint, const ParameterList& state);

}  // namespace gatedattn
