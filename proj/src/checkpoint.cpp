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

#include "gatedattn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gatedattn/errors.hpp"

namespace gatedattn {

namespace {

constexpr char kMagic[8] = {'G', 'A', 'T', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint64_t kMaxString = std::uint64_t{1} << 32;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes_.append(s);
  }
  void raw(const char* p, std::size_t n) { bytes_.append(p, n); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ParseError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > kMaxString) throw ParseError("checkpoint: implausible string length");
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  unsigned char byte() { return static_cast<unsigned char>(bytes_[pos_++]); }

  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(checkpoint.version);
  w.str(checkpoint.config);
  w.u64(checkpoint.tensors.size());
  for (const auto& [name, value] : checkpoint.tensors) {
    w.str(name);
    w.u64(value.rank());
    for (std::size_t d : value.shape()) w.u64(d);
    for (double v : value.data()) w.f64(v);
  }
  w.str(checkpoint.rng_state);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
  if (r.raw(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw ParseError("checkpoint: " + path + " is not a checkpoint file");
  }
  Checkpoint ck;
  ck.version = r.u32();
  if (ck.version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(ck.version));
  }
  ck.config = r.str();
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const std::uint64_t rank = r.u64();
    if (rank > 8) throw ParseError("checkpoint: implausible rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const std::size_t n = numel(shape);
    r.need(n * 8);
    std::vector<double> values(n);
    for (double& v : values) v = r.f64();
    ck.tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  ck.rng_state = r.str();
  if (!r.done()) throw ParseError("checkpoint: trailing bytes");
  return ck;
}

void apply_checkpoint(const Checkpoint& checkpoint, const ParameterList& state) {
  for (const auto& target : state) {
    const NamedParameter* source = nullptr;
    for (const auto& t : checkpoint.tensors) {
      if (t.name == target.name) source = &t;
    }
    if (source == nullptr) throw ContractError("checkpoint has no tensor '" + target.name + "'");
    if (source->value.shape() != target.value.shape()) {
      throw ContractError("checkpoint tensor '" + target.name + "' has shape " +
                          to_string(source->value.shape()) + ", model expects " +
                          to_string(target.value.shape()));
    }
    const auto src = source->value.data();
    std::copy(src.begin(), src.end(), target.value.mutable_data().begin());
  }
}

}  // namespace gatedattn
