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

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "arl/error.hpp"
#include "arl/model.hpp"

using namespace arl;

namespace {

Matrix row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Matrix(1, n, std::move(v));
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

// Entropy in an arbitrary log base, written independently of the library.
double entropy_in_base(const Matrix& logits, double base) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double z = 0.0;
    for (double v : logits.row(i)) z += std::exp(v);
    for (double v : logits.row(i)) {
      const double p = std::exp(v) / z;
      total -= p * std::log(p) / std::log(base);
    }
  }
  return total / static_cast<double>(logits.rows);
}

}  // namespace

TEST(DependencyRatioTest, UniformLogitsGiveOneOverM) {
  const std::vector<Matrix> logits{Matrix(3, 5, 0.2), Matrix(3, 5, -1.0)};
  const std::vector<int> y{0, 4, 2};
  const auto r = dependency_ratio(logits, y);
  EXPECT_NEAR(r.d[0], 0.2, 1e-15);
  EXPECT_NEAR(r.d[1], 0.2, 1e-15);
  EXPECT_NEAR(r.ratio, 1.0, 1e-14);
}

TEST(DependencyRatioTest, HandComputedRatio) {
  const std::vector<Matrix> logits{row({std::log(3.0), 0.0}), row({0.0, 0.0})};
  const std::vector<int> y{0};
  const auto r = dependency_ratio(logits, y);
  EXPECT_NEAR(r.d[0], 0.75, 1e-15);
  EXPECT_NEAR(r.d[1], 0.5, 1e-15);
  EXPECT_NEAR(r.ratio, 1.5, 1e-14);
  const std::vector<Matrix> swapped{logits[1], logits[0]};
  EXPECT_DOUBLE_EQ(dependency_ratio(swapped, y).ratio, 1.0 / r.ratio);
}

TEST(DependencyRatioTest, ShiftInvariantPerRow) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a(4, 3), b(4, 3);
    for (auto& v : a.data) v = n(rng);
    for (auto& v : b.data) v = n(rng);
    Matrix a2 = a, b2 = b;
    for (std::size_t i = 0; i < 4; ++i) {
      const double c = n(rng) * 10.0;
      for (auto& v : a2.row(i)) v += c;
      for (auto& v : b2.row(i)) v -= c;
    }
    const std::vector<int> y{0, 1, 2, 1};
    const std::vector<Matrix> orig{a, b}, shifted{a2, b2};
    EXPECT_NEAR(dependency_ratio(orig, y).ratio, dependency_ratio(shifted, y).ratio, 1e-12);
  }
}

TEST(DependencyRatioTest, ErrorsAndPositivity) {
  const std::vector<Matrix> empty{Matrix(0, 3), Matrix(0, 3)};
  EXPECT_THROW(dependency_ratio(empty, std::vector<int>{}), ValueError);
  // The true class is hopeless: probability underflows but d stays positive.
  const std::vector<Matrix> extreme{row({0.0, 1e5}), row({0.0, 0.0})};
  const auto r = dependency_ratio(extreme, std::vector<int>{0});
  EXPECT_GT(r.d[0], 0.0);
  EXPECT_TRUE(std::isfinite(r.ratio));
  EXPECT_GT(r.ratio, 0.0);
}

TEST(VarianceProxyTest, UniformEntropyIsLogM) {
  EXPECT_NEAR(mean_entropy(Matrix(2, 6, 1.5)), std::log(6.0), 1e-14);
  // 1 / ln 6 = 0.5581106265512472 (mpmath)
  EXPECT_NEAR(variance_proxy(Matrix(2, 6, 1.5)), 0.5581106265512473, 1e-14);
}

TEST(VarianceProxyTest, PeakedLogits) {
  // Reference from mpmath at 30 digits: H = 9.98711894057462635e-4.
  EXPECT_NEAR(variance_proxy(row({10.0, 0.0, 0.0})), 1001.2897672994603, 1e-9);
}

TEST(VarianceProxyTest, OneHotHitsFloor) {
  EXPECT_EQ(variance_proxy(row({1000.0, 0.0, 0.0})), 1e6);
  EXPECT_EQ(variance_proxy(row({1000.0, 0.0, 0.0}), 1e-3), 1e3);
}

TEST(VarianceProxyTest, NonFiniteRejected) {
  EXPECT_THROW(variance_proxy(row({std::nan(""), 0.0})), ValueError);
  EXPECT_THROW(variance_proxy(Matrix(0, 3)), ValueError);
}

TEST(VarianceProxyTest, RatioIndependentOfLogBase) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.5);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix a(5, 4), b(5, 4);
    for (auto& v : a.data) v = n(rng);
    for (auto& v : b.data) v = n(rng);
    const double natural = variance_proxy(a) / variance_proxy(b);
    for (double base : {2.0, 10.0}) {
      const double other = (1.0 / entropy_in_base(a, base)) / (1.0 / entropy_in_base(b, base));
      EXPECT_NEAR(natural, other, 1e-10 * natural);
    }
  }
}

TEST(ModulationTest, TargetMetGivesHalf) {
  const std::array<double, 2> q{2.0, 1.0};
  const std::array<double, 2> d{0.6, 0.3};
  const auto a = modulation_coefficients(q, d, 4.0);
  EXPECT_NEAR(a[0], 0.5, 1e-15);
  EXPECT_NEAR(a[1], 0.5, 1e-15);
}

TEST(ModulationTest, TwoWaySoftmaxValue) {
  const std::array<double, 2> q{3.0, 1.0};
  const std::array<double, 2> d{0.4, 0.4};
  const auto a = modulation_coefficients(q, d, 1.0);
  // e^3 / (e^3 + e^1), mpmath.
  EXPECT_NEAR(a[0], 0.8807970779778824, 1e-15);
  EXPECT_NEAR(a[1], 0.11920292202211755, 1e-15);
}

TEST(ModulationTest, LargerTemperatureWidensGap) {
  const std::array<double, 2> q{1.7, 1.0};
  const std::array<double, 2> d{0.5, 0.45};
  double prev = 0.0;
  for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const auto a = modulation_coefficients(q, d, t);
    const double gap = std::abs(a[0] - a[1]);
    EXPECT_GT(gap, prev);
    prev = gap;
  }
}

TEST(ModulationTest, RejectsNonPositiveInputs) {
  const std::array<double, 2> ok{1.0, 1.0};
  const std::array<double, 2> bad{0.0, 1.0};
  EXPECT_THROW(modulation_coefficients(bad, ok, 1.0), ValueError);
  EXPECT_THROW(modulation_coefficients(ok, bad, 1.0), ValueError);
  EXPECT_THROW(modulation_coefficients(ok, ok, 0.0), ValueError);
}

TEST(ModulationTest, SimplexPropertyIncludingExtremes) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 3);
    std::vector<double> q(k), d(k);
    for (auto& v : q) v = trial % 7 == 0 ? (trial % 2 ? 1e6 : 1.0) : log_uniform(rng, 0.1, 1e6);
    for (auto& v : d) v = log_uniform(rng, 1e-6, 1.0 - 1e-9);
    for (double t : {1.0, 4.0, 8.0}) {
      const auto a = modulation_coefficients(q, d, t);
      double sum = 0.0;
      for (double v : a) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(ModulationTest, MonotoneInVarianceRatio) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::array<double, 2> d{log_uniform(rng, 0.01, 0.99), log_uniform(rng, 0.01, 0.99)};
    double prev = 0.0;
    for (double ratio : {0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 1e3, 1e6}) {
      const std::array<double, 2> q{ratio, 1.0};
      const double a0 = modulation_coefficients(q, d, 4.0)[0];
      EXPECT_GE(a0, prev);
      prev = a0;
    }
  }
}

TEST(ModulationTest, ManyModalityShareRatio) {
  const std::array<double, 3> q{1.0, 1.0, 1.0};
  const std::array<double, 3> d{0.2, 0.2, 0.2};
  for (double v : modulation_coefficients(q, d, 4.0)) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const std::array<double, 3> q2{2.0, 1.0, 1.0};
  const auto a = modulation_coefficients(q2, d, 1.0);
  EXPECT_GT(a[0], a[1]);
  EXPECT_DOUBLE_EQ(a[1], a[2]);
}

TEST(ModulateGradientTest, ScaleArithmetic) {
  EXPECT_DOUBLE_EQ(modulation_scale(0.5), 1.5);
  EXPECT_DOUBLE_EQ(modulation_scale(0.5, false), 0.5);
  EXPECT_NEAR(modulation_scale(kCoefficientFloor), 1.0, 1e-11);
  EXPECT_THROW(modulation_scale(0.0), ValueError);
  EXPECT_THROW(modulation_scale(1.0), ValueError);

  ad::Tensor z = ad::Tensor::leaf(Matrix(1, 2, {1.0, -2.0}));
  ad::Tensor hook = ad::grad_scale(z);
  modulate_gradient(hook, 0.5);
  ad::backward(ad::matmul_nt(hook, ad::Tensor::leaf(Matrix(1, 2, {4.0, 8.0}))));
  EXPECT_EQ(z.grad().data, (std::vector<double>{6.0, 12.0}));
}

TEST(ModulateGradientTest, NormRatioWithinOneAndTwo) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix zv(3, 4);
    for (auto& v : zv.data) v = n(rng);
    ad::Tensor z = ad::Tensor::leaf(zv);
    ad::Tensor hook = ad::grad_scale(z);
    const std::array<double, 2> q{log_uniform(rng, 0.01, 1e6), log_uniform(rng, 0.01, 1e6)};
    const std::array<double, 2> d{log_uniform(rng, 0.01, 0.99), log_uniform(rng, 0.01, 0.99)};
    modulate_gradient(hook, modulation_coefficients(q, d, 8.0)[trial % 2]);
    Matrix wv(2, 4);
    for (auto& v : wv.data) v = n(rng);
    ad::backward(ad::softmax_cross_entropy(ad::matmul_nt(hook, ad::Tensor::leaf(wv)),
                                           std::vector<int>{0, 1, 0}));
    const auto s = ad::grad_scale_stats(hook);
    ASSERT_GT(s.upstream_norm, 0.0);
    const double ratio = s.propagated_norm / s.upstream_norm;
    EXPECT_GT(ratio, 1.0);
    EXPECT_LT(ratio, 2.0);
  }
}

TEST(ArlLossTest, GammaZeroIsMultimodalCrossEntropy) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix f(4, 3), u0(4, 3), u1(4, 3);
  for (auto* m : {&f, &u0, &u1}) {
    for (auto& v : m->data) v = n(rng);
  }
  const std::vector<int> y{0, 2, 1, 1};
  ArlConfig cfg;
  cfg.gamma = 0.0;
  const std::vector<ad::Tensor> uni{ad::Tensor::leaf(u0), ad::Tensor::leaf(u1)};
  const auto out = arl_loss(ad::Tensor::leaf(f), uni, y, cfg);
  EXPECT_EQ(out.state.loss_total, ad::softmax_cross_entropy(ad::Tensor::leaf(f), y).item());
}

TEST(ArlLossTest, TotalIsWeightedSum) {
  // Logits engineered so each cross-entropy hits a chosen value: with M = 2 and
  // logits [0, -x], CE for class 0 is ln(1 + e^-x).
  auto logits_for = [](double ce) { return Matrix(1, 2, {0.0, -std::log(1.0 / (std::exp(ce) - 1.0))}); };
  const std::vector<int> y{0};
  const std::vector<ad::Tensor> uni{ad::Tensor::leaf(logits_for(0.5)), ad::Tensor::leaf(logits_for(0.3))};
  ArlConfig cfg;
  const auto out = arl_loss(ad::Tensor::leaf(logits_for(1.0)), uni, y, cfg);
  EXPECT_NEAR(out.state.loss_fused, 1.0, 1e-12);
  EXPECT_NEAR(out.state.u[0], 0.5, 1e-12);
  EXPECT_NEAR(out.state.u[1], 0.3, 1e-12);
  EXPECT_NEAR(out.state.loss_total, 4.2, 1e-12);
  EXPECT_NEAR(out.total.item(), 4.2, 1e-12);
}

TEST(ArlLossTest, PerfectPredictionsGiveZero) {
  const Matrix confident(2, 3, {50.0, 0.0, 0.0, 0.0, 50.0, 0.0});
  const std::vector<int> y{0, 1};
  const std::vector<ad::Tensor> uni{ad::Tensor::leaf(confident), ad::Tensor::leaf(confident)};
  const auto out = arl_loss(ad::Tensor::leaf(confident), uni, y, ArlConfig{});
  EXPECT_NEAR(out.state.loss_total, 0.0, 1e-19);
}

TEST(ArlLossTest, StateInvariantsAndToggles) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix f(6, 4), u0(6, 4), u1(6, 4);
  for (auto* m : {&f, &u0, &u1}) {
    for (auto& v : m->data) v = n(rng);
  }
  const std::vector<int> y{0, 1, 2, 3, 0, 1};
  const std::vector<ad::Tensor> uni{ad::Tensor::leaf(u0), ad::Tensor::leaf(u1)};
  ArlConfig cfg;
  auto out = arl_loss(ad::Tensor::leaf(f), uni, y, cfg);
  ASSERT_EQ(out.state.a.size(), 2u);
  EXPECT_NEAR(out.state.a[0] + out.state.a[1], 1.0, 1e-12);
  for (double q : out.state.q) EXPECT_GT(q, 0.0);
  for (double d : out.state.d) {
    EXPECT_GT(d, 0.0);
    EXPECT_LT(d, 1.0);
  }
  cfg.use_al = false;
  cfg.use_ur = false;
  out = arl_loss(ad::Tensor::leaf(f), uni, y, cfg);
  EXPECT_TRUE(out.state.a.empty());
  EXPECT_EQ(out.state.loss_total, out.state.loss_fused);
  cfg.gamma = -1.0;
  EXPECT_THROW(arl_loss(ad::Tensor::leaf(f), uni, y, cfg), ValueError);
}

TEST(ArlLossTest, BalancedTargetIgnoresVariance) {
  ArlState s;
  s.q = {5.0, 1.0};
  s.d = {0.5, 0.5};
  ArlConfig cfg;
  cfg.target = ModulationTarget::balanced;
  assign_coefficients(s, cfg);
  EXPECT_NEAR(s.a[0], 0.5, 1e-15);
  cfg.target = ModulationTarget::variance;
  assign_coefficients(s, cfg);
  EXPECT_GT(s.a[0], 0.99);
}

TEST(ArlLossTest, GradientMatchesFiniteDifferences) {
  for (Fusion fusion : {Fusion::concat, Fusion::gated}) {
    ModelConfig mc;
    mc.input_dims = {3, 4};
    mc.rep_dims = {3, 3};
    mc.hidden = {4};
    mc.fusion = fusion;
    mc.num_classes = 3;
    const auto p = init_model(mc, 12);
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Matrix> x{Matrix(5, 3), Matrix(5, 4)};
    for (auto& m : x) {
      for (auto& v : m.data) v = n(rng);
    }
    const std::vector<int> y{0, 1, 2, 2, 1};
    auto build = [&] {
      const auto pass = forward_multimodal(p, x);
      return arl_loss(pass.fused_logits, pass.unimodal_logits, y, ArlConfig{}).total;
    };
    const auto report = ad::finite_difference_check(build, p.tensors());
    EXPECT_LT(report.max_rel_error, 1e-4) << fusion_name(fusion);
  }
}

TEST(RatioSmootherTest, ExponentialAverage) {
  RatioSmoother s(0.9);
  ArlState a;
  a.q = {1.0, 2.0};
  a.d = {0.5, 0.5};
  s.update(a);
  EXPECT_EQ(a.q, (std::vector<double>{1.0, 2.0}));
  ArlState b;
  b.q = {2.0, 2.0};
  b.d = {0.1, 0.5};
  s.update(b);
  EXPECT_NEAR(b.q[0], 1.1, 1e-15);
  EXPECT_NEAR(b.d[0], 0.46, 1e-15);
}

TEST(ArlStateJsonTest, SchemaKeysInOrder) {
  ArlState s;
  s.q = {1.0, 2.0};
  s.d = {0.5, 0.25};
  s.a = {0.6, 0.4};
  s.u = {0.1, 0.2};
  s.loss_fused = 0.7;
  s.loss_total = 1.9;
  EXPECT_EQ(arl_state_jsonl(s, 3, 1),
            R"({"step":3,"epoch":1,"q":[1.0,2.0],"d":[0.5,0.25],"a":[0.6,0.4],"u":[0.1,0.2],)"
            R"("loss_fused":0.7,"loss_total":1.9})");
}
