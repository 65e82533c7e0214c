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

#include "arl/model.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "arl/error.hpp"

namespace arl {

std::string_view fusion_name(Fusion f) { return f == Fusion::concat ? "concat" : "gated"; }

Fusion parse_fusion(std::string_view name) {
  if (name == "concat") return Fusion::concat;
  if (name == "gated") return Fusion::gated;
  throw ValueError("unknown fusion '" + std::string(name) + "' (expected concat or gated)");
}

std::size_t ModelConfig::fused_width() const {
  if (fusion == Fusion::gated) return rep_dims.empty() ? 0 : rep_dims.front();
  return std::accumulate(rep_dims.begin(), rep_dims.end(), std::size_t{0});
}

std::vector<std::string> ModelConfig::violations() const {
  std::vector<std::string> out;
  if (input_dims.size() < 2) out.emplace_back("at least 2 modalities required");
  if (rep_dims.size() != input_dims.size()) {
    out.push_back("rep_dims has " + std::to_string(rep_dims.size()) + " entries for " +
                  std::to_string(input_dims.size()) + " modalities");
  }
  for (std::size_t k = 0; k < input_dims.size(); ++k) {
    if (input_dims[k] == 0) out.push_back("input dim of modality " + std::to_string(k) + " is 0");
  }
  for (std::size_t k = 0; k < rep_dims.size(); ++k) {
    if (rep_dims[k] == 0) out.push_back("rep dim of modality " + std::to_string(k) + " is 0");
  }
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (hidden[i] == 0) out.push_back("hidden layer " + std::to_string(i) + " has width 0");
  }
  if (num_classes < 2) out.emplace_back("num_classes must be at least 2");
  if (fusion == Fusion::gated && !rep_dims.empty()) {
    for (std::size_t d : rep_dims) {
      if (d != rep_dims.front()) {
        out.emplace_back("gated fusion requires equal rep dims");
        break;
      }
    }
  }
  return out;
}

void ModelConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw ValueError(msg);
}

std::vector<std::pair<std::string, ad::Tensor>> ModelParams::named_tensors() const {
  std::vector<std::pair<std::string, ad::Tensor>> out;
  for (std::size_t k = 0; k < encoders.size(); ++k) {
    for (std::size_t l = 0; l < encoders[k].size(); ++l) {
      const std::string prefix = "enc" + std::to_string(k) + ".l" + std::to_string(l);
      out.emplace_back(prefix + ".weight", encoders[k][l].weight);
      out.emplace_back(prefix + ".bias", encoders[k][l].bias);
    }
  }
  if (gate) {
    out.emplace_back("gate.weight", gate->weight);
    out.emplace_back("gate.bias", gate->bias);
  }
  out.emplace_back("cls.weight", classifier.weight);
  out.emplace_back("cls.bias", classifier.bias);
  return out;
}

std::vector<ad::Tensor> ModelParams::tensors() const {
  std::vector<ad::Tensor> out;
  for (auto& [name, t] : named_tensors()) out.push_back(t);
  return out;
}

void ModelParams::zero_grad() {
  for (auto& t : tensors()) t.zero_grad();
}

namespace {

LinearLayer xavier_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(out, in);
  for (auto& v : w.data) v = dist(rng);
  return {ad::Tensor::leaf(std::move(w)), ad::Tensor::zeros(1, out)};
}

ad::Tensor fuse(const ModelParams& params, std::span<const ad::Tensor> parts) {
  if (params.config.fusion == Fusion::concat) return ad::concat(parts);
  // Softmax over per-modality scalar gates computed from all representations.
  const ad::Tensor gates =
      ad::softmax_rows(ad::linear(ad::concat(parts), params.gate->weight, params.gate->bias));
  ad::Tensor fused;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    ad::Tensor term = ad::row_scale(parts[k], ad::slice_cols(gates, k, k + 1));
    fused = fused ? ad::add(fused, term) : term;
  }
  return fused;
}

ad::Tensor classify(const ModelParams& params, const ad::Tensor& fused) {
  return ad::linear(fused, params.classifier.weight, params.classifier.bias);
}

}  // namespace

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParams params;
  params.config = cfg;
  for (std::size_t k = 0; k < cfg.num_modalities(); ++k) {
    std::vector<LinearLayer> layers;
    std::size_t in = cfg.input_dims[k];
    for (std::size_t width : cfg.hidden) {
      layers.push_back(xavier_layer(in, width, rng));
      in = width;
    }
    layers.push_back(xavier_layer(in, cfg.rep_dims[k], rng));
    params.encoders.push_back(std::move(layers));
  }
  if (cfg.fusion == Fusion::gated) {
    const std::size_t total = std::accumulate(cfg.rep_dims.begin(), cfg.rep_dims.end(), std::size_t{0});
    params.gate = xavier_layer(total, cfg.num_modalities(), rng);
  }
  params.classifier = xavier_layer(cfg.fused_width(), cfg.num_classes, rng);
  return params;
}

ForwardPass forward_multimodal(const ModelParams& params, std::span<const Matrix> inputs) {
  const ModelConfig& cfg = params.config;
  if (inputs.size() != cfg.num_modalities()) {
    throw ShapeError("forward: " + std::to_string(inputs.size()) + " modality inputs for a " +
                     std::to_string(cfg.num_modalities()) + "-modality model");
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].cols != cfg.input_dims[k]) {
      throw ShapeError("forward: modality " + std::to_string(k) + " has " +
                       std::to_string(inputs[k].cols) + " features, expected " +
                       std::to_string(cfg.input_dims[k]));
    }
    if (inputs[k].rows != inputs[0].rows || inputs[k].rows == 0) {
      throw ShapeError("forward: modality " + std::to_string(k) + " has " +
                       std::to_string(inputs[k].rows) + " rows, expected " +
                       std::to_string(inputs[0].rows) + " (non-empty)");
    }
  }

  ForwardPass pass;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    ad::Tensor h = ad::Tensor::leaf(inputs[k]);
    for (const auto& layer : params.encoders[k]) h = ad::relu(ad::linear(h, layer.weight, layer.bias));
    pass.representations.push_back(h);
    pass.hooks.push_back(ad::grad_scale(h, 1.0));
  }
  pass.fused = fuse(params, pass.hooks);
  pass.fused_logits = classify(params, pass.fused);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    pass.unimodal_logits.push_back(unimodal_logits(params, pass.representations, k));
  }
  return pass;
}

ad::Tensor unimodal_logits(const ModelParams& params,
                           std::span<const ad::Tensor> representations, std::size_t k) {
  if (k >= representations.size()) {
    throw ValueError("unimodal_logits: modality " + std::to_string(k) + " out of range for " +
                     std::to_string(representations.size()) + " modalities");
  }
  std::vector<ad::Tensor> parts;
  parts.reserve(representations.size());
  for (std::size_t j = 0; j < representations.size(); ++j) {
    parts.push_back(j == k ? representations[j] : ad::zero_mask(representations[j]));
  }
  return classify(params, fuse(params, parts));
}

}  // namespace arl
