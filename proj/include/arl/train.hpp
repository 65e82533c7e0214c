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
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arl/arl_core.hpp"
#include "arl/data.hpp"
#include "arl/error.hpp"
#include "arl/model.hpp"

namespace arl {

struct OptimizerConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;

  std::vector<std::string> violations() const;
  void validate() const;

  bool operator==(const OptimizerConfig&) const = default;
};

enum class StrategyKind { vanilla, balanced, arl };

std::string_view strategy_name(StrategyKind k);
StrategyKind parse_strategy(std::string_view name);

struct Strategy {
  StrategyKind kind = StrategyKind::arl;
  ArlConfig arl;

  // The ARL configuration actually used: vanilla disables UR/AL/GR, balanced
  // targets a dependency ratio of 1.
  ArlConfig effective() const;

  bool operator==(const Strategy&) const = default;
};

// v <- momentum v + (g + wd p); p <- p - lr v.
void sgd_update(std::span<double> param, std::span<const double> grad, std::span<double> velocity,
                const OptimizerConfig& opt);

// SGD with momentum over a fixed list of parameter tensors; velocities start at 0.
class SgdMomentum {
 public:
  explicit SgdMomentum(OptimizerConfig opt) : opt_(opt) {}
  void step(std::span<const ad::Tensor> params);

 private:
  OptimizerConfig opt_;
  std::vector<std::vector<double>> velocity_;
};

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;

  bool operator==(const Metrics&) const = default;
};

// Classes missing from both predictions and labels score F1 = 0 and still
// count towards the macro average.
Metrics classification_metrics(std::span<const int> predicted, std::span<const int> labels,
                               std::size_t num_classes);

// Argmax of the fused logits over the whole dataset.
Metrics evaluate(const ModelParams& params, const Dataset& data);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss_fused = 0.0;
  double loss_total = 0.0;
  std::vector<double> u;
  Metrics train;
  Metrics test;
  double q_ratio = 0.0;  // step mean of q0 / q1
  double d_ratio = 0.0;  // step mean of d0 / d1
  std::vector<double> a;  // step mean per modality; empty without asymmetric learning
  // Extremes over steps and encoders of |fusion-path grad out| / |grad in| at
  // the hooks. NaN when no hook saw a non-zero gradient.
  double min_grad_ratio = 0.0;
  double max_grad_ratio = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainReport {
  Metrics initial_test;  // before any update
  std::vector<EpochRecord> epochs;
  Metrics final_test;
  double wall_seconds = 0.0;
  std::string checkpoint_path;
};

// Equality of everything but wall-clock time and checkpoint location.
bool same_results(const TrainReport& a, const TrainReport& b);

struct StepRecord {
  std::size_t step = 0;  // global, 0-based
  std::size_t epoch = 0;
  ArlState state;
  std::vector<double> grad_norm_ratio;  // per encoder; NaN for a zero upstream gradient
};

using StepObserver = std::function<void(const StepRecord&)>;

class NanLossError : public Error {
 public:
  using Error::Error;
};

struct TrainResult {
  TrainReport report;
  ModelParams params;
};

// Forward, loss, coefficients from the batch, hook scales, backward, SGD step.
// Deterministic in the configs and seeds. Throws NanLossError on a non-finite
// loss or logit.
TrainResult train(const ModelConfig& model_cfg, const SplitDataset& data, const Strategy& strategy,
                  const OptimizerConfig& opt, const StepObserver& observer = {});

}  // namespace arl
