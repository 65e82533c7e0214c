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

#include "arl/arl_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "arl/error.hpp"

namespace arl {

namespace {

void check_logits(const Matrix& logits, const char* what) {
  if (logits.rows == 0) throw ValueError(std::string(what) + ": empty batch");
  if (logits.cols == 0) throw ShapeError(std::string(what) + ": logits have no classes");
  for (double v : logits.data) {
    if (!std::isfinite(v)) throw ValueError(std::string(what) + ": non-finite logit");
  }
}

// log softmax of one row.
std::vector<double> log_softmax(std::span<const double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double v : row) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] - lse;
  return out;
}

std::vector<double> stable_softmax(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

// Lifts underflowed coefficients to the floor and sets the largest entry to
// one minus the rest, so the sum stays 1.
void apply_floor(std::vector<double>& a) {
  bool floored = false;
  for (auto& v : a) {
    if (v < kCoefficientFloor) {
      v = kCoefficientFloor;
      floored = true;
    }
  }
  if (!floored) return;
  const auto largest = std::max_element(a.begin(), a.end());
  double rest = 0.0;
  for (auto it = a.begin(); it != a.end(); ++it) {
    if (it != largest) rest += *it;
  }
  *largest = 1.0 - rest;
}

ad::Tensor scaled(const ad::Tensor& t, double c) { return ad::matmul(t, ad::Tensor::scalar(c)); }

}  // namespace

std::vector<std::string> ArlConfig::violations() const {
  std::vector<std::string> out;
  if (!(temperature > 0.0) || !std::isfinite(temperature)) out.emplace_back("temperature must be > 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) out.emplace_back("gamma must be >= 0");
  if (!(entropy_floor > 0.0)) out.emplace_back("entropy_floor must be > 0");
  if (!(smoothing_decay >= 0.0 && smoothing_decay < 1.0)) {
    out.emplace_back("smoothing_decay must be in [0, 1)");
  }
  return out;
}

void ArlConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid ARL config:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw ValueError(msg);
}

double dependency(const Matrix& logits, std::span<const int> labels) {
  check_logits(logits, "dependency");
  if (labels.size() != logits.rows) {
    throw ShapeError("dependency: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows) + " rows");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols) {
      throw ValueError("dependency: label " + std::to_string(y) + " at index " + std::to_string(i) +
                       " out of range");
    }
    sum += std::exp(log_softmax(logits.row(i))[static_cast<std::size_t>(y)]);
  }
  const double d = sum / static_cast<double>(logits.rows);
  return std::clamp(d, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

DependencyRatio dependency_ratio(std::span<const Matrix> unimodal_logits,
                                 std::span<const int> labels) {
  if (unimodal_logits.size() < 2) throw ValueError("dependency_ratio: need at least two modalities");
  DependencyRatio out;
  for (const auto& logits : unimodal_logits) out.d.push_back(dependency(logits, labels));
  out.ratio = out.d[0] / out.d[1];
  return out;
}

double mean_entropy(const Matrix& logits) {
  check_logits(logits, "mean_entropy");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double h = 0.0;
    for (double lp : log_softmax(logits.row(i))) h -= std::exp(lp) * lp;
    total += h;
  }
  return total / static_cast<double>(logits.rows);
}

double variance_proxy(const Matrix& logits, double entropy_floor) {
  if (!(entropy_floor > 0.0)) throw ValueError("variance_proxy: entropy floor must be positive");
  return 1.0 / std::max(mean_entropy(logits), entropy_floor);
}

std::vector<double> modulation_coefficients(std::span<const double> q, std::span<const double> d,
                                            double temperature) {
  if (q.size() != d.size() || q.size() < 2) {
    throw ValueError("modulation_coefficients: need matching q and d for at least two modalities");
  }
  if (!(temperature > 0.0)) throw ValueError("modulation_coefficients: temperature must be > 0");
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (!(q[k] > 0.0) || !(d[k] > 0.0) || !std::isfinite(q[k]) || !std::isfinite(d[k])) {
      throw ValueError("modulation_coefficients: q and d must be positive and finite (modality " +
                       std::to_string(k) + ")");
    }
  }
  std::vector<double> logits;
  if (q.size() == 2) {
    logits = {q[0] / q[1] * temperature, d[0] / d[1] * temperature};
  } else {
    const double q_sum = std::accumulate(q.begin(), q.end(), 0.0);
    const double d_sum = std::accumulate(d.begin(), d.end(), 0.0);
    for (std::size_t k = 0; k < q.size(); ++k) {
      logits.push_back(temperature * (q[k] / q_sum) / (d[k] / d_sum));
    }
  }
  auto a = stable_softmax(logits);
  apply_floor(a);
  return a;
}

double modulation_scale(double a, bool residual) {
  if (!(a > 0.0 && a < 1.0)) {
    throw ValueError("modulation coefficient " + std::to_string(a) + " outside (0, 1)");
  }
  return residual ? 1.0 + a : a;
}

void modulate_gradient(const ad::Tensor& hook, double a, bool residual) {
  ad::set_grad_scale(hook, modulation_scale(a, residual));
}

void assign_coefficients(ArlState& state, const ArlConfig& cfg) {
  if (!cfg.use_al) {
    state.a.clear();
    return;
  }
  if (cfg.target == ModulationTarget::balanced) {
    const std::vector<double> flat(state.q.size(), 1.0);
    state.a = modulation_coefficients(flat, state.d, cfg.temperature);
  } else {
    state.a = modulation_coefficients(state.q, state.d, cfg.temperature);
  }
}

ArlLoss arl_loss(const ad::Tensor& fused_logits, std::span<const ad::Tensor> unimodal_logits,
                 std::span<const int> labels, const ArlConfig& cfg) {
  cfg.validate();
  ArlLoss out;
  const ad::Tensor fused_ce = ad::softmax_cross_entropy(fused_logits, labels);
  out.state.loss_fused = fused_ce.item();

  ad::Tensor unimodal_sum;
  std::vector<Matrix> values;
  for (const auto& logits : unimodal_logits) {
    const ad::Tensor u = ad::softmax_cross_entropy(logits, labels);
    out.state.u.push_back(u.item());
    out.state.q.push_back(variance_proxy(logits.value(), cfg.entropy_floor));
    values.push_back(logits.value());
    unimodal_sum = unimodal_sum ? ad::add(unimodal_sum, u) : u;
  }
  out.state.d = dependency_ratio(values, labels).d;

  out.total = cfg.use_ur ? ad::add(fused_ce, scaled(unimodal_sum, cfg.gamma)) : fused_ce;
  out.state.loss_total = out.total.item();
  assign_coefficients(out.state, cfg);
  return out;
}

void RatioSmoother::update(ArlState& state) {
  if (q_.empty()) {
    q_ = state.q;
    d_ = state.d;
  } else {
    for (std::size_t k = 0; k < q_.size(); ++k) {
      q_[k] = decay_ * q_[k] + (1.0 - decay_) * state.q[k];
      d_[k] = decay_ * d_[k] + (1.0 - decay_) * state.d[k];
    }
  }
  state.q = q_;
  state.d = d_;
}

std::string arl_state_jsonl(const ArlState& state, std::size_t step, std::size_t epoch) {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["q"] = state.q;
  j["d"] = state.d;
  j["a"] = state.a;
  j["u"] = state.u;
  j["loss_fused"] = state.loss_fused;
  j["loss_total"] = state.loss_total;
  return j.dump();
}

}  // namespace arl
