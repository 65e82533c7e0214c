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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "arl/matrix.hpp"
#include "arl/tensor.hpp"

namespace arl {

enum class Fusion { concat, gated };

std::string_view fusion_name(Fusion f);
Fusion parse_fusion(std::string_view name);

// Architecture of a K-modality late-fusion classifier. Every encoder applies
// (linear -> relu) for each width in `hidden` and once more into its
// representation width.
struct ModelConfig {
  std::vector<std::size_t> input_dims;  // one entry per modality
  std::vector<std::size_t> hidden;      // shared encoder hidden widths
  std::vector<std::size_t> rep_dims;    // representation width d_k per modality
  Fusion fusion = Fusion::concat;
  std::size_t num_classes = 2;

  std::size_t num_modalities() const { return input_dims.size(); }
  // Width of the fused representation fed to the classifier.
  std::size_t fused_width() const;
  // Human-readable list of violated constraints; empty when valid.
  std::vector<std::string> violations() const;
  // Throws ValueError listing every violation.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// weight is (out x in), bias is (1 x out).
struct LinearLayer {
  ad::Tensor weight;
  ad::Tensor bias;
};

struct ModelParams {
  ModelConfig config;
  std::vector<std::vector<LinearLayer>> encoders;
  std::optional<LinearLayer> gate;  // gated fusion: (K x sum d_k) -> K gate logits
  LinearLayer classifier;           // (M x fused_width)

  // Parameter tensors in canonical order, paired with stable names
  // ("enc0.l1.weight", "gate.bias", "cls.weight", ...).
  std::vector<std::pair<std::string, ad::Tensor>> named_tensors() const;
  std::vector<ad::Tensor> tensors() const;
  void zero_grad();
};

// Xavier-uniform weights and zero biases from a seeded generator.
ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed);

struct ForwardPass {
  std::vector<ad::Tensor> representations;  // encoder outputs z_k
  std::vector<ad::Tensor> hooks;            // grad_scale(z_k), the fusion inputs
  ad::Tensor fused;                         // z_f
  ad::Tensor fused_logits;                  // B x M
  std::vector<ad::Tensor> unimodal_logits;  // B x M per modality
};

// Builds the full graph for one batch. Hooks start at scale 1; unimodal logits
// read the raw representations, so only the fusion path passes through hooks.
ForwardPass forward_multimodal(const ModelParams& params, std::span<const Matrix> inputs);

// Logits relying on modality k alone: every other representation is replaced by
// zero_mask before the shared fusion and classifier.
ad::Tensor unimodal_logits(const ModelParams& params,
                           std::span<const ad::Tensor> representations, std::size_t k);

}  // namespace arl
