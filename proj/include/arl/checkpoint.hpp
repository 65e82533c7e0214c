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

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "arl/matrix.hpp"
#include "arl/model.hpp"

namespace arl {

// Binary checkpoint layout (all integers and doubles little-endian):
//
//   bytes 0..7   magic "ARLCKPT1"
//   uint32       tensor count
//   per tensor:  uint32 name length, name bytes (no terminator),
//                uint64 rows, uint64 cols, rows*cols float64 values (row-major)
//
// Values are stored as raw IEEE-754 bits, so save/load round trips are exact.
using NamedMatrices = std::vector<std::pair<std::string, Matrix>>;

void write_checkpoint(const std::filesystem::path& path, const NamedMatrices& tensors);
NamedMatrices read_checkpoint(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const ModelParams& params);
// Loads tensors into a freshly shaped model for `cfg`; names and shapes must
// match exactly.
ModelParams load_model(const std::filesystem::path& path, const ModelConfig& cfg);

}  // namespace arl
