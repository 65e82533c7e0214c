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
#include <vector>

namespace arl::theory {

// Scalar predictions of K estimators against N targets.
struct EnsembleSample {
  std::vector<std::vector<double>> predictions;  // K rows of length N
  std::vector<double> targets;
  std::optional<double> noise_variance;  // known only for synthetic samples

  std::size_t size() const { return targets.size(); }
  std::size_t num_estimators() const { return predictions.size(); }
  // Throws ValueError unless every array has the same length N >= 2.
  void validate() const;
};

struct EstimatorStats {
  double bias = 0.0;      // E[s - y]
  double variance = 0.0;  // E[s^2] - E[s]^2
};

struct BiasVarianceReport {
  std::vector<EstimatorStats> estimators;
  double bias = 0.0;      // E[f - y] for f = sum_k w_k s_k
  double bias_squared = 0.0;
  double variance = 0.0;  // E[f^2] - E[f]^2
  double mse = 0.0;       // E[(f - y)^2]
  double mse_standard_error = 0.0;
  std::optional<double> noise_variance;

  // bias^2 + Var(f) + Var(eps); requires a known noise variance.
  std::optional<double> decomposed_mse() const;
};

// Empirical moments over the sample. Weights must sum to 1.
BiasVarianceReport bias_variance_decompose(const EnsembleSample& sample,
                                           std::span<const double> weights);

struct WeightSolution {
  std::vector<double> weights;
  bool feasible = false;  // every weight in (0, 1)
  double objective = 0.0;
};

// w_k proportional to 1 / Var_k; objective is the combined variance
// sum_k w_k^2 Var_k of independent estimators.
WeightSolution optimal_variance_weights(std::span<const double> variances);

// The two-estimator weights that cancel the combined bias:
// w0 = b1 / (b1 - b0), w1 = -b0 / (b1 - b0). Objective is w0 b0 + w1 b1.
// Throws ValueError when b0 == b1.
WeightSolution bias_weight_solution(double bias0, double bias1);

// True iff the biases have strictly opposite signs.
bool opposite_signs(double a, double b);

struct OracleResult {
  std::vector<double> weights;
  double objective = 0.0;  // empirical mean squared error at the argmin
  std::size_t evaluated = 0;
};

// Exhaustive search over the simplex grid {i * step : sum = 1} minimizing
// (1/N) sum_i (sum_k w_k s_k,i - y_i)^2. Requires 0 < step <= 0.1.
OracleResult grid_search_weight_oracle(const EnsembleSample& sample, double grid_step);

// Standard error of the empirical MSE-optimal w0 for two independent unbiased
// Gaussian estimators: sqrt(v0 v1 / n) / (v0 + v1).
double optimal_weight_standard_error(double v0, double v1, std::size_t n);

// y_i ~ N(0, 1), s_k,i = y_i + N(0, Var_k).
EnsembleSample simulate_unbiased_ensemble(std::span<const double> variances, std::size_t n,
                                          std::uint64_t seed);

// Repeated draws at one input: y_i = signal + eps_i with Var(eps) = noise_variance,
// s_k,i = signal + bias_k + N(0, Var_k).
EnsembleSample simulate_regression_ensemble(std::span<const double> biases,
                                            std::span<const double> variances,
                                            double noise_variance, std::size_t n,
                                            std::uint64_t seed, double signal = 1.0);

struct AgreementCase {
  std::vector<double> variances;
  std::vector<double> closed_form;
  std::vector<double> oracle;
  double standard_error = 0.0;  // of w0
  double delta = 0.0;           // |closed w0 - oracle w0|
  double tolerance = 0.0;       // grid_step + 3 SE
  bool agrees = false;
};

// Simulates an unbiased two-estimator ensemble and compares the inverse-variance
// closed form with the grid oracle.
AgreementCase compare_closed_form_to_oracle(double v0, double v1, std::size_t n, double grid_step,
                                            std::uint64_t seed);

}  // namespace arl::theory
