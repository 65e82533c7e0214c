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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arl/matrix.hpp"

namespace arl {

enum class Split { train, test };

std::string_view split_name(Split s);

// Labeled multimodal samples; row i of every feature matrix belongs to label i.
struct Dataset {
  std::vector<Matrix> features;  // per modality, N x dim_k
  std::vector<int> labels;
  std::size_t num_classes = 0;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::size_t num_modalities() const { return features.size(); }
  std::vector<std::size_t> dims() const;
  // Throws ShapeError / ValueError on misaligned rows or bad labels.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

struct Batch {
  std::vector<Matrix> features;
  std::vector<int> labels;
  std::vector<std::size_t> indices;  // rows of the source dataset

  std::size_t size() const { return labels.size(); }
};

// Gaussian class clusters per modality. Each (class, modality) pair gets a
// unit-norm center scaled by `separation`; samples add noise[k] * N(0, I).
struct SynthSpec {
  std::size_t num_classes = 4;
  std::size_t samples_per_class = 200;
  std::vector<std::size_t> dims{16, 16};
  std::vector<double> noise{0.3, 2.0};
  double separation = 1.0;
  std::uint64_t seed = 0;

  std::size_t num_modalities() const { return dims.size(); }
  std::vector<std::string> violations() const;
  void validate() const;

  bool operator==(const SynthSpec&) const = default;
};

struct SplitDataset {
  Dataset train;
  Dataset test;
};

// Deterministic in `spec`. 80/20 split stratified by class.
SplitDataset generate_synthetic(const SynthSpec& spec);

// Column layout of a CSV feature file. Columns of modality k are
// [begin, end) and must be headed m<k>_0 ... m<k>_<dim-1>; the label column is
// headed "label".
struct CsvSchema {
  struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;
  };
  std::vector<Range> modalities;
  std::size_t label_column = 0;
  std::size_t num_classes = 0;

  // m0 columns, then m1 columns, ..., then label.
  static CsvSchema contiguous(std::span<const std::size_t> dims, std::size_t num_classes);
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                 Split split = Split::train);
// Writes the contiguous layout with shortest round-trip decimal floats.
void write_csv(const std::filesystem::path& path, const Dataset& data);

// Seeded permutation of rows cut into consecutive chunks; the last may be short.
std::vector<Batch> batches(const Dataset& data, std::size_t batch_size, std::uint64_t epoch_seed);

// Every row in dataset order.
Batch full_batch(const Dataset& data);

}  // namespace arl
