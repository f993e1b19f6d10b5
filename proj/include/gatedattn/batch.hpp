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
#include <vector>

namespace gatedattn {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;

// Right-padded token ids for one minibatch. mask[b * max_len + t] == 1 exactly
// when t < lengths[b]; ids at masked-out positions are kPadId.
struct SequenceBatch {
  std::size_t batch_size = 0;
  std::size_t max_len = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> lengths;
  std::vector<std::uint8_t> mask;
  std::vector<int> labels;
  // Position of each row in the source example list.
  std::vector<std::size_t> example_index;

  bool valid(std::size_t b, std::size_t t) const { return mask[b * max_len + t] != 0; }
  std::size_t total_length() const {
    std::size_t n = 0;
    for (std::size_t len : lengths) n += len;
    return n;
  }
};

}  // namespace gatedattn
