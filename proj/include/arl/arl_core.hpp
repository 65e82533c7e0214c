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
#include <span>
#include <string>
#include <vector>

#include "arl/matrix.hpp"
#include "arl/tensor.hpp"

namespace arl {

// What the modulation coefficients steer the dependency ratio towards.
enum class ModulationTarget {
  variance,  // inverse-variance ratio q0/q1 (asymmetric learning)
  balanced,  // ratio 1, the rebalancing reference
};

struct ArlConfig {
  double temperature = 4.0;
  double gamma = 4.0;
  double entropy_floor = 1e-6;
  bool use_ur = true;  // unimodal bias regularization
  bool use_al = true;  // asymmetric learning coefficients
  bool use_gr = true;  // gradient residual, scale 1 + a instead of a
  ModulationTarget target = ModulationTarget::variance;
  // Exponential moving average of q and d across steps before computing a.
  bool smoothing = false;
  double smoothing_decay = 0.9;

  std::vector<std::string> violations() const;
  void validate() const;

  bool operator==(const ArlConfig&) const = default;
};

struct ArlState {
  std::vector<double> q;  // inverse mean entropy per modality
  std::vector<double> d;  // mean true-class probability per modality
  std::vector<double> a;  // modulation coefficients; empty when asymmetric learning is off
  std::vector<double> u;  // unimodal cross-entropy per modality
  double loss_fused = 0.0;
  double loss_total = 0.0;

  double q_ratio() const { return q.at(0) / q.at(1); }
  double d_ratio() const { return d.at(0) / d.at(1); }
};

// Smallest coefficient handed out; keeps every a_k strictly inside (0, 1) when
// the softmax would underflow.
inline constexpr double kCoefficientFloor = 1e-12;

// Batch mean of softmax(logits_i)[y_i], clamped into the open interval (0, 1).
double dependency(const Matrix& logits, std::span<const int> labels);

struct DependencyRatio {
  std::vector<double> d;
  double ratio = 1.0;  // d[0] / d[1]
};
DependencyRatio dependency_ratio(std::span<const Matrix> unimodal_logits,
                                 std::span<const int> labels);

// Batch mean Shannon entropy (natural log) of softmax(logits).
double mean_entropy(const Matrix& logits);

// q = 1 / max(H, entropy_floor).
double variance_proxy(const Matrix& logits, double entropy_floor = 1e-6);

// Two modalities: softmax([T q0/q1, T d0/d1]). More modalities: softmax of T
// times each modality's q-share over its d-share.
std::vector<double> modulation_coefficients(std::span<const double> q, std::span<const double> d,
                                            double temperature);

// Backward scale for an encoder given its coefficient: 1 + a with the residual,
// a alone without. Throws ValueError unless 0 < a < 1.
double modulation_scale(double a, bool residual = true);

// Sets the hook so the fusion-path gradient into an encoder becomes g (1 + a).
void modulate_gradient(const ad::Tensor& hook, double a, bool residual = true);

struct ArlLoss {
  ad::Tensor total;
  ArlState state;
};

// L = CE(p_f) + gamma * sum_k CE(p_k) with UR, else CE(p_f). q and d are always
// reported; a only with asymmetric learning on.
ArlLoss arl_loss(const ad::Tensor& fused_logits, std::span<const ad::Tensor> unimodal_logits,
                 std::span<const int> labels, const ArlConfig& cfg);

// Recomputes state.a from q and d, honouring cfg.target.
void assign_coefficients(ArlState& state, const ArlConfig& cfg);

// EMA of q and d across steps. The first update seeds the averages.
class RatioSmoother {
 public:
  explicit RatioSmoother(double decay) : decay_(decay) {}
  // Replaces state.q / state.d with their running averages.
  void update(ArlState& state);

 private:
  double decay_;
  std::vector<double> q_;
  std::vector<double> d_;
};

// {"step", "epoch", "q", "d", "a", "u", "loss_fused", "loss_total"} on one line.
std::string arl_state_jsonl(const ArlState& state, std::size_t step, std::size_t epoch);

}  // namespace arl
