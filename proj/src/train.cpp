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

#include "arl/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace arl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed * 0x9E3779B97F4A7C15ULL + epoch;
}

void check_finite(const ad::Tensor& logits, std::size_t step, const char* what) {
  for (double v : logits.value().data) {
    if (!std::isfinite(v)) {
      throw NanLossError("non-finite " + std::string(what) + " at iteration " + std::to_string(step));
    }
  }
}

std::string describe(const ArlState& s) {
  std::string out = "loss_fused=" + std::to_string(s.loss_fused) +
                    " loss_total=" + std::to_string(s.loss_total) + " u=[";
  for (std::size_t k = 0; k < s.u.size(); ++k) out += (k ? ", " : "") + std::to_string(s.u[k]);
  return out + "]";
}

struct EpochAccumulator {
  std::size_t steps = 0;
  double loss_fused = 0.0;
  double loss_total = 0.0;
  std::vector<double> u;
  std::vector<double> a;
  double q_ratio = 0.0;
  double d_ratio = 0.0;
  double min_ratio = std::numeric_limits<double>::infinity();
  double max_ratio = -std::numeric_limits<double>::infinity();

  void add(const StepRecord& r) {
    ++steps;
    loss_fused += r.state.loss_fused;
    loss_total += r.state.loss_total;
    u.resize(r.state.u.size(), 0.0);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] += r.state.u[k];
    a.resize(r.state.a.size(), 0.0);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += r.state.a[k];
    q_ratio += r.state.q_ratio();
    d_ratio += r.state.d_ratio();
    for (double g : r.grad_norm_ratio) {
      if (std::isnan(g)) continue;
      min_ratio = std::min(min_ratio, g);
      max_ratio = std::max(max_ratio, g);
    }
  }

  EpochRecord finish(std::size_t epoch) const {
    EpochRecord e;
    e.epoch = epoch;
    const double n = static_cast<double>(std::max<std::size_t>(steps, 1));
    e.loss_fused = loss_fused / n;
    e.loss_total = loss_total / n;
    for (double v : u) e.u.push_back(v / n);
    for (double v : a) e.a.push_back(v / n);
    e.q_ratio = q_ratio / n;
    e.d_ratio = d_ratio / n;
    const bool any = min_ratio <= max_ratio;
    e.min_grad_ratio = any ? min_ratio : kNaN;
    e.max_grad_ratio = any ? max_ratio : kNaN;
    return e;
  }
};

}  // namespace

std::vector<std::string> OptimizerConfig::violations() const {
  std::vector<std::string> out;
  if (!(lr > 0.0) || !std::isfinite(lr)) out.emplace_back("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) out.emplace_back("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) out.emplace_back("weight_decay must be >= 0");
  if (batch_size < 1) out.emplace_back("batch_size must be >= 1");
  return out;
}

void OptimizerConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid optimizer config:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw ValueError(msg);
}

std::string_view strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::vanilla:
      return "vanilla";
    case StrategyKind::balanced:
      return "balanced";
    case StrategyKind::arl:
      return "arl";
  }
  return "arl";
}

StrategyKind parse_strategy(std::string_view name) {
  if (name == "vanilla") return StrategyKind::vanilla;
  if (name == "balanced") return StrategyKind::balanced;
  if (name == "arl") return StrategyKind::arl;
  throw ValueError("unknown strategy '" + std::string(name) + "' (expected vanilla, balanced or arl)");
}

ArlConfig Strategy::effective() const {
  ArlConfig cfg = arl;
  switch (kind) {
    case StrategyKind::vanilla:
      cfg.use_ur = cfg.use_al = cfg.use_gr = false;
      break;
    case StrategyKind::balanced:
      cfg.target = ModulationTarget::balanced;
      break;
    case StrategyKind::arl:
      cfg.target = ModulationTarget::variance;
      break;
  }
  return cfg;
}

void sgd_update(std::span<double> param, std::span<const double> grad, std::span<double> velocity,
                const OptimizerConfig& opt) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw ShapeError("sgd_update: parameter, gradient and velocity sizes differ (" +
                     std::to_string(param.size()) + ", " + std::to_string(grad.size()) + ", " +
                     std::to_string(velocity.size()) + ")");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = opt.momentum * velocity[i] + (grad[i] + opt.weight_decay * param[i]);
    param[i] -= opt.lr * velocity[i];
  }
}

void SgdMomentum::step(std::span<const ad::Tensor> params) {
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.emplace_back(p.value().size(), 0.0);
  }
  if (velocity_.size() != params.size()) {
    throw ShapeError("SgdMomentum: parameter list changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Tensor p = params[i];
    sgd_update(p.mutable_value().data, p.grad().data, velocity_[i], opt_);
  }
}

Metrics classification_metrics(std::span<const int> predicted, std::span<const int> labels,
                               std::size_t num_classes) {
  if (predicted.size() != labels.size()) throw ShapeError("metrics: prediction/label count mismatch");
  if (labels.empty()) throw ValueError("metrics: empty dataset");
  std::vector<double> tp(num_classes, 0.0), fp(num_classes, 0.0), fn(num_classes, 0.0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto p = static_cast<std::size_t>(predicted[i]);
    const auto y = static_cast<std::size_t>(labels[i]);
    if (p == y) {
      ++correct;
      tp[y] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[y] += 1.0;
    }
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    m.per_class_f1.push_back(denom > 0.0 ? 2.0 * tp[c] / denom : 0.0);
    m.macro_f1 += m.per_class_f1.back();
  }
  m.macro_f1 /= static_cast<double>(num_classes);
  return m;
}

Metrics evaluate(const ModelParams& params, const Dataset& data) {
  if (data.size() == 0) throw ValueError("evaluate: empty dataset");
  const Batch all = full_batch(data);
  const ForwardPass pass = forward_multimodal(params, all.features);
  const Matrix& logits = pass.fused_logits.value();
  std::vector<int> predicted(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const auto r = logits.row(i);
    predicted[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return classification_metrics(predicted, all.labels, params.config.num_classes);
}

bool same_results(const TrainReport& a, const TrainReport& b) {
  auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  if (a.initial_test != b.initial_test || a.final_test != b.final_test) return false;
  if (a.epochs.size() != b.epochs.size()) return false;
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    EpochRecord x = a.epochs[i];
    EpochRecord y = b.epochs[i];
    if (!same(x.min_grad_ratio, y.min_grad_ratio) || !same(x.max_grad_ratio, y.max_grad_ratio)) {
      return false;
    }
    x.min_grad_ratio = y.min_grad_ratio = x.max_grad_ratio = y.max_grad_ratio = 0.0;
    if (!(x == y)) return false;
  }
  return true;
}

TrainResult train(const ModelConfig& model_cfg, const SplitDataset& data, const Strategy& strategy,
                  const OptimizerConfig& opt, const StepObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  opt.validate();
  const ArlConfig cfg = strategy.effective();
  cfg.validate();
  data.train.validate();
  data.test.validate();
  if (data.train.dims() != model_cfg.input_dims || data.train.num_classes != model_cfg.num_classes) {
    throw ShapeError("train: dataset dims/classes do not match the model config");
  }

  TrainResult result{{}, init_model(model_cfg, opt.seed)};
  ModelParams& params = result.params;
  TrainReport& report = result.report;
  report.initial_test = evaluate(params, data.test);

  const std::vector<ad::Tensor> tensors = params.tensors();
  SgdMomentum sgd(opt);
  RatioSmoother smoother(cfg.smoothing_decay);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    EpochAccumulator acc;
    for (const Batch& batch : batches(data.train, opt.batch_size, epoch_seed(opt.seed, epoch))) {
      params.zero_grad();
      const ForwardPass pass = forward_multimodal(params, batch.features);
      check_finite(pass.fused_logits, step, "fused logits");
      for (const auto& u : pass.unimodal_logits) check_finite(u, step, "unimodal logits");

      ArlLoss loss = arl_loss(pass.fused_logits, pass.unimodal_logits, batch.labels, cfg);
      if (!std::isfinite(loss.state.loss_total)) {
        throw NanLossError("non-finite loss at iteration " + std::to_string(step) + ": " +
                           describe(loss.state));
      }
      if (cfg.smoothing) {
        smoother.update(loss.state);
        assign_coefficients(loss.state, cfg);
      }
      if (cfg.use_al) {
        for (std::size_t k = 0; k < pass.hooks.size(); ++k) {
          modulate_gradient(pass.hooks[k], loss.state.a[k], cfg.use_gr);
        }
      }
      ad::backward(loss.total);

      StepRecord record{step, epoch, std::move(loss.state), {}};
      for (const auto& hook : pass.hooks) {
        const auto s = ad::grad_scale_stats(hook);
        record.grad_norm_ratio.push_back(s.upstream_norm > 0.0 ? s.propagated_norm / s.upstream_norm
                                                               : kNaN);
      }
      sgd.step(tensors);
      acc.add(record);
      if (observer) observer(record);
      ++step;
    }
    EpochRecord e = acc.finish(epoch);
    e.train = evaluate(params, data.train);
    e.test = evaluate(params, data.test);
    report.epochs.push_back(std::move(e));
  }
  report.final_test = evaluate(params, data.test);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace arl
