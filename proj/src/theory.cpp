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

#include "arl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "arl/error.hpp"

namespace arl::theory {

namespace {

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_variance(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double m = mean(v);
  return sq / static_cast<double>(v.size()) - m * m;
}

void check_weights(std::span<const double> weights, std::size_t k) {
  if (weights.size() != k) {
    throw ValueError("weights: " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(k) + " estimators");
  }
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) throw ValueError("weights must sum to 1, got " + std::to_string(sum));
}

std::vector<double> combine(const EnsembleSample& s, std::span<const double> w) {
  std::vector<double> f(s.size(), 0.0);
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += w[k] * s.predictions[k][i];
  }
  return f;
}

// Visits every composition of `total` into `parts` non-negative integers.
template <typename Fn>
void for_each_composition(std::size_t total, std::size_t parts, std::vector<std::size_t>& current,
                          Fn&& fn) {
  if (current.size() + 1 == parts) {
    std::size_t used = std::accumulate(current.begin(), current.end(), std::size_t{0});
    current.push_back(total - used);
    fn(current);
    current.pop_back();
    return;
  }
  const std::size_t used = std::accumulate(current.begin(), current.end(), std::size_t{0});
  for (std::size_t i = 0; i + used <= total; ++i) {
    current.push_back(i);
    for_each_composition(total, parts, current, fn);
    current.pop_back();
  }
}

}  // namespace

void EnsembleSample::validate() const {
  if (targets.size() < 2) throw ValueError("ensemble sample needs N >= 2 targets");
  if (predictions.empty()) throw ValueError("ensemble sample has no estimators");
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    if (predictions[k].size() != targets.size()) {
      throw ValueError("estimator " + std::to_string(k) + " has " +
                       std::to_string(predictions[k].size()) + " predictions for " +
                       std::to_string(targets.size()) + " targets");
    }
  }
}

std::optional<double> BiasVarianceReport::decomposed_mse() const {
  if (!noise_variance) return std::nullopt;
  return bias_squared + variance + *noise_variance;
}

BiasVarianceReport bias_variance_decompose(const EnsembleSample& sample,
                                           std::span<const double> weights) {
  sample.validate();
  check_weights(weights, sample.num_estimators());
  const std::size_t n = sample.size();
  BiasVarianceReport r;
  r.noise_variance = sample.noise_variance;
  for (const auto& s : sample.predictions) {
    std::vector<double> err(n);
    for (std::size_t i = 0; i < n; ++i) err[i] = s[i] - sample.targets[i];
    r.estimators.push_back({mean(err), population_variance(s)});
  }
  const auto f = combine(sample, weights);
  std::vector<double> sq(n);
  double bias = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = f[i] - sample.targets[i];
    bias += e;
    sq[i] = e * e;
  }
  r.bias = bias / static_cast<double>(n);
  r.bias_squared = r.bias * r.bias;
  r.variance = population_variance(f);
  r.mse = mean(sq);
  double dev = 0.0;
  for (double v : sq) dev += (v - r.mse) * (v - r.mse);
  r.mse_standard_error = std::sqrt(dev / static_cast<double>(n - 1) / static_cast<double>(n));
  return r;
}

WeightSolution optimal_variance_weights(std::span<const double> variances) {
  if (variances.empty()) throw ValueError("optimal_variance_weights: no estimators");
  double total = 0.0;
  for (std::size_t k = 0; k < variances.size(); ++k) {
    if (!(variances[k] > 0.0) || !std::isfinite(variances[k])) {
      throw ValueError("optimal_variance_weights: variance " + std::to_string(k) +
                       " must be positive and finite");
    }
    total += 1.0 / variances[k];
  }
  WeightSolution sol;
  sol.feasible = true;
  for (double v : variances) {
    const double w = (1.0 / v) / total;
    sol.weights.push_back(w);
    sol.objective += w * w * v;
    sol.feasible = sol.feasible && w > 0.0 && w < 1.0;
  }
  return sol;
}

bool opposite_signs(double a, double b) { return (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0); }

WeightSolution bias_weight_solution(double bias0, double bias1) {
  if (bias0 == bias1) {
    throw ValueError("bias_weight_solution: equal biases (" + std::to_string(bias0) +
                     ") leave the denominator at zero");
  }
  const double denom = bias1 - bias0;
  WeightSolution sol;
  sol.weights = {bias1 / denom, -bias0 / denom};
  sol.feasible = std::all_of(sol.weights.begin(), sol.weights.end(),
                             [](double w) { return w > 0.0 && w < 1.0; });
  sol.objective = sol.weights[0] * bias0 + sol.weights[1] * bias1;
  return sol;
}

OracleResult grid_search_weight_oracle(const EnsembleSample& sample, double grid_step) {
  sample.validate();
  if (!(grid_step > 0.0 && grid_step <= 0.1)) {
    throw ValueError("grid_search_weight_oracle: grid_step must be in (0, 0.1]");
  }
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / grid_step));
  const std::size_t k = sample.num_estimators();
  const std::size_t n = sample.size();
  OracleResult best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> current;
  std::vector<double> w(k);
  for_each_composition(steps, k, current, [&](const std::vector<std::size_t>& counts) {
    for (std::size_t j = 0; j < k; ++j) w[j] = static_cast<double>(counts[j]) / static_cast<double>(steps);
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double f = 0.0;
      for (std::size_t j = 0; j < k; ++j) f += w[j] * sample.predictions[j][i];
      const double e = f - sample.targets[i];
      sse += e * e;
    }
    const double mse = sse / static_cast<double>(n);
    ++best.evaluated;
    if (mse < best.objective) {
      best.objective = mse;
      best.weights = w;
    }
  });
  return best;
}

double optimal_weight_standard_error(double v0, double v1, std::size_t n) {
  return std::sqrt(v0 * v1 / static_cast<double>(n)) / (v0 + v1);
}

EnsembleSample simulate_unbiased_ensemble(std::span<const double> variances, std::size_t n,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  EnsembleSample s;
  s.targets.resize(n);
  for (auto& y : s.targets) y = unit(rng);
  for (double v : variances) {
    const double sd = std::sqrt(v);
    std::vector<double> pred(n);
    for (std::size_t i = 0; i < n; ++i) pred[i] = s.targets[i] + sd * unit(rng);
    s.predictions.push_back(std::move(pred));
  }
  return s;
}

EnsembleSample simulate_regression_ensemble(std::span<const double> biases,
                                            std::span<const double> variances,
                                            double noise_variance, std::size_t n,
                                            std::uint64_t seed, double signal) {
  if (biases.size() != variances.size()) {
    throw ValueError("simulate_regression_ensemble: biases and variances differ in length");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  EnsembleSample s;
  s.noise_variance = noise_variance;
  s.targets.resize(n);
  const double noise_sd = std::sqrt(noise_variance);
  for (auto& y : s.targets) y = signal + noise_sd * unit(rng);
  for (std::size_t k = 0; k < biases.size(); ++k) {
    const double sd = std::sqrt(variances[k]);
    std::vector<double> pred(n);
    for (auto& p : pred) p = signal + biases[k] + sd * unit(rng);
    s.predictions.push_back(std::move(pred));
  }
  return s;
}

AgreementCase compare_closed_form_to_oracle(double v0, double v1, std::size_t n, double grid_step,
                                            std::uint64_t seed) {
  AgreementCase c;
  c.variances = {v0, v1};
  c.closed_form = optimal_variance_weights(c.variances).weights;
  const auto sample = simulate_unbiased_ensemble(c.variances, n, seed);
  c.oracle = grid_search_weight_oracle(sample, grid_step).weights;
  c.standard_error = optimal_weight_standard_error(v0, v1, n);
  c.delta = std::abs(c.closed_form[0] - c.oracle[0]);
  c.tolerance = grid_step + 3.0 * c.standard_error;
  c.agrees = c.delta <= c.tolerance;
  return c;
}

}  // namespace arl::theory
