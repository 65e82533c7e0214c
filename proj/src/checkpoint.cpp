// Copyright 2026 The ARL Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "arl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "arl/error.hpp"

namespace arl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'R', 'L', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw FormatError("checkpoint " + path.string() + ": truncated file");
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const NamedMatrices& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, m.rows);
    put<std::uint64_t>(out, m.cols);
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

NamedMatrices read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("checkpoint " + path.string() + ": bad magic");
  }
  const auto count = take<std::uint32_t>(in, path);
  NamedMatrices out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = take<std::uint32_t>(in, path);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw FormatError("checkpoint " + path.string() + ": truncated name");
    const auto rows = take<std::uint64_t>(in, path);
    const auto cols = take<std::uint64_t>(in, path);
    Matrix m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data.data()),
                 static_cast<std::streamsize>(m.data.size() * sizeof(double)))) {
      throw FormatError("checkpoint " + path.string() + ": truncated tensor '" + name + "'");
    }
    out.emplace_back(std::move(name), std::move(m));
  }
  return out;
}

void save_model(const std::filesystem::path& path, const ModelParams& params) {
  NamedMatrices tensors;
  for (const auto& [name, t] : params.named_tensors()) tensors.emplace_back(name, t.value());
  write_checkpoint(path, tensors);
}

ModelParams load_model(const std::filesystem::path& path, const ModelConfig& cfg) {
  ModelParams params = init_model(cfg, 0);
  const auto stored = read_checkpoint(path);
  auto slots = params.named_tensors();
  if (stored.size() != slots.size()) {
    throw FormatError("checkpoint " + path.string() + ": " + std::to_string(stored.size()) +
                      " tensors, model expects " + std::to_string(slots.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& [name, tensor] = slots[i];
    const auto& [stored_name, value] = stored[i];
    if (stored_name != name || !value.same_shape(tensor.value())) {
      throw FormatError("checkpoint " + path.string() + ": expected " + name + " " +
                        tensor.value().shape_string() + ", found " + stored_name + " " +
                        value.shape_string());
    }
    tensor.mutable_value() = value;
  }
  return params;
}

}  // namespace arl
