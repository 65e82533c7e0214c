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

#include "arl/tensor.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <string>
#include <unordered_set>

#include "arl/error.hpp"

namespace arl::ad {

struct OpRecord {
  Op kind;
  std::vector<std::shared_ptr<Node>> inputs;
  OpAttrs attrs;
  std::vector<int> labels;  // cross_entropy
  Matrix saved;             // cross_entropy: probabilities
  GradScaleStats stats;     // grad_scale
};

struct Node {
  std::uint64_t id = 0;
  Matrix value;
  Matrix grad;
  std::unique_ptr<OpRecord> op;
};

namespace {

std::atomic<std::uint64_t> next_node_id{1};

constexpr std::array<std::string_view, 13> kOpNames = {
    "matmul",     "add_bias", "relu", "sigmoid",   "concat",     "hadamard",     "zero_mask",
    "grad_scale", "add",      "row_scale", "slice_cols", "softmax_rows", "cross_entropy"};

std::shared_ptr<Node> make_node(Matrix value, std::unique_ptr<OpRecord> op) {
  auto node = std::make_shared<Node>();
  node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
  node->grad = Matrix(value.rows, value.cols);
  node->value = std::move(value);
  node->op = std::move(op);
  return node;
}

std::unique_ptr<OpRecord> record(Op kind, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  auto rec = std::make_unique<OpRecord>();
  rec->kind = kind;
  rec->attrs = attrs;
  rec->inputs.reserve(inputs.size());
  for (const auto& t : inputs) rec->inputs.push_back(t.node());
  return rec;
}

[[noreturn]] void shape_error(Op kind, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + a.shape_string() +
                   " and " + b.shape_string());
}

void expect_arity(Op kind, std::span<const Tensor> inputs, std::size_t n) {
  if (inputs.size() != n) {
    throw ShapeError(std::string(op_name(kind)) + ": expected " + std::to_string(n) +
                     " inputs, got " + std::to_string(inputs.size()));
  }
  for (const auto& t : inputs) {
    if (!t) throw ValueError(std::string(op_name(kind)) + ": empty tensor input");
  }
}

Matrix forward_matmul(const Matrix& a, const Matrix& b, bool transpose_rhs) {
  const std::size_t inner_b = transpose_rhs ? b.cols : b.rows;
  const std::size_t out_cols = transpose_rhs ? b.rows : b.cols;
  if (a.cols != inner_b) shape_error(Op::matmul, a, b);
  Matrix out(a.rows, out_cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < out_cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) {
        acc += a(i, k) * (transpose_rhs ? b(j, k) : b(k, j));
      }
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix row_softmax(const Matrix& x) {
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto in = x.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (auto& v : o) v /= sum;
  }
  return out;
}

// Accumulates the gradient held by `out` into its inputs.
void propagate(Node& out) {
  OpRecord& rec = *out.op;
  const Matrix& dy = out.grad;
  auto& in = rec.inputs;
  switch (rec.kind) {
    case Op::matmul: {
      Matrix& a = in[0]->value;
      Matrix& b = in[1]->value;
      Matrix& da = in[0]->grad;
      Matrix& db = in[1]->grad;
      for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < dy.cols; ++j) {
          const double g = dy(i, j);
          if (g == 0.0) continue;
          for (std::size_t k = 0; k < a.cols; ++k) {
            if (rec.attrs.transpose_rhs) {
              da(i, k) += g * b(j, k);
              db(j, k) += g * a(i, k);
            } else {
              da(i, k) += g * b(k, j);
              db(k, j) += g * a(i, k);
            }
          }
        }
      }
      break;
    }
    case Op::add_bias: {
      Matrix& dx = in[0]->grad;
      Matrix& db = in[1]->grad;
      for (std::size_t i = 0; i < dy.rows; ++i) {
        for (std::size_t j = 0; j < dy.cols; ++j) {
          dx(i, j) += dy(i, j);
          db(0, j) += dy(i, j);
        }
      }
      break;
    }
    case Op::relu: {
      const Matrix& x = in[0]->value;
      Matrix& dx = in[0]->grad;
      for (std::size_t i = 0; i < dy.size(); ++i) {
        if (x.data[i] > 0.0) dx.data[i] += dy.data[i];
      }
      break;
    }
    case Op::sigmoid: {
      Matrix& dx = in[0]->grad;
      for (std::size_t i = 0; i < dy.size(); ++i) {
        const double y = out.value.data[i];
        dx.data[i] += dy.data[i] * y * (1.0 - y);
      }
      break;
    }
    case Op::concat: {
      std::size_t offset = 0;
      for (auto& part : in) {
        Matrix& dp = part->grad;
        for (std::size_t i = 0; i < dp.rows; ++i) {
          for (std::size_t j = 0; j < dp.cols; ++j) dp(i, j) += dy(i, offset + j);
        }
        offset += dp.cols;
      }
      break;
    }
    case Op::hadamard: {
      const Matrix& a = in[0]->value;
      const Matrix& b = in[1]->value;
      Matrix& da = in[0]->grad;
      Matrix& db = in[1]->grad;
      for (std::size_t i = 0; i < dy.size(); ++i) {
        da.data[i] += dy.data[i] * b.data[i];
        db.data[i] += dy.data[i] * a.data[i];
      }
      break;
    }
    case Op::zero_mask:
      break;
    case Op::grad_scale: {
      Matrix& dx = in[0]->grad;
      const double s = rec.attrs.scale;
      double up = 0.0;
      double prop = 0.0;
      for (std::size_t i = 0; i < dy.size(); ++i) {
        const double g = s * dy.data[i];
        dx.data[i] += g;
        up += dy.data[i] * dy.data[i];
        prop += g * g;
      }
      rec.stats = {std::sqrt(up), std::sqrt(prop)};
      break;
    }
    case Op::add: {
      Matrix& da = in[0]->grad;
      Matrix& db = in[1]->grad;
      for (std::size_t i = 0; i < dy.size(); ++i) {
        da.data[i] += dy.data[i];
        db.data[i] += dy.data[i];
      }
      break;
    }
    case Op::row_scale: {
      const Matrix& x = in[0]->value;
      const Matrix& s = in[1]->value;
      Matrix& dx = in[0]->grad;
      Matrix& ds = in[1]->grad;
      for (std::size_t i = 0; i < dy.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < dy.cols; ++j) {
          dx(i, j) += dy(i, j) * s(i, 0);
          acc += dy(i, j) * x(i, j);
        }
        ds(i, 0) += acc;
      }
      break;
    }
    case Op::slice_cols: {
      Matrix& dx = in[0]->grad;
      for (std::size_t i = 0; i < dy.rows; ++i) {
        for (std::size_t j = 0; j < dy.cols; ++j) dx(i, rec.attrs.begin + j) += dy(i, j);
      }
      break;
    }
    case Op::softmax_rows: {
      const Matrix& y = out.value;
      Matrix& dx = in[0]->grad;
      for (std::size_t i = 0; i < dy.rows; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < dy.cols; ++j) dot += dy(i, j) * y(i, j);
        for (std::size_t j = 0; j < dy.cols; ++j) dx(i, j) += y(i, j) * (dy(i, j) - dot);
      }
      break;
    }
    case Op::cross_entropy: {
      const Matrix& p = rec.saved;
      Matrix& dx = in[0]->grad;
      const double g = dy(0, 0) / static_cast<double>(p.rows);
      for (std::size_t i = 0; i < p.rows; ++i) {
        for (std::size_t j = 0; j < p.cols; ++j) {
          const double target = static_cast<int>(j) == rec.labels[i] ? 1.0 : 0.0;
          dx(i, j) += g * (p(i, j) - target);
        }
      }
      break;
    }
  }
}

const Node& deref(const std::shared_ptr<Node>& node) {
  if (!node) throw ValueError("tensor: empty handle");
  return *node;
}

OpRecord& hook_record(const Tensor& hook) {
  if (!hook || !hook.node()->op || hook.node()->op->kind != Op::grad_scale) {
    throw ValueError("tensor is not a grad_scale node");
  }
  return *hook.node()->op;
}

// Every node reachable from `root`, sorted by construction id (a valid
// topological order since inputs always precede their consumers).
std::vector<std::shared_ptr<Node>> reachable(const std::shared_ptr<Node>& root) {
  std::vector<std::shared_ptr<Node>> nodes;
  std::unordered_set<const Node*> seen{root.get()};
  std::vector<std::shared_ptr<Node>> stack{root};
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    if (n->op) {
      for (auto& input : n->op->inputs) {
        if (seen.insert(input.get()).second) stack.push_back(input);
      }
    }
    nodes.push_back(std::move(n));
  }
  std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a->id < b->id; });
  return nodes;
}

}  // namespace

std::string_view op_name(Op op) { return kOpNames[static_cast<std::size_t>(op)]; }

Op parse_op(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<Op>(i);
  }
  throw ValueError("unknown primitive '" + std::string(name) + "'");
}

Tensor Tensor::leaf(Matrix value) { return Tensor(make_node(std::move(value), nullptr)); }
Tensor Tensor::zeros(std::size_t rows, std::size_t cols) { return leaf(Matrix(rows, cols)); }
Tensor Tensor::scalar(double v) { return leaf(Matrix(1, 1, v)); }

std::size_t Tensor::rows() const { return deref(node_).value.rows; }
std::size_t Tensor::cols() const { return deref(node_).value.cols; }
const Matrix& Tensor::value() const { return deref(node_).value; }
const Matrix& Tensor::grad() const { return deref(node_).grad; }
Matrix& Tensor::mutable_grad() { return const_cast<Node&>(deref(node_)).grad; }

Matrix& Tensor::mutable_value() {
  if (!is_leaf()) throw ValueError("mutable_value: only leaf tensors may be modified");
  return node_->value;
}

void Tensor::zero_grad() {
  auto& g = mutable_grad().data;
  std::fill(g.begin(), g.end(), 0.0);
}

double Tensor::item() const {
  const Matrix& v = value();
  if (v.rows != 1 || v.cols != 1) throw ShapeError("item: tensor is " + v.shape_string());
  return v.data[0];
}

bool Tensor::is_leaf() const { return deref(node_).op == nullptr; }

std::optional<Op> Tensor::op() const {
  const Node& n = deref(node_);
  if (!n.op) return std::nullopt;
  return n.op->kind;
}

std::uint64_t Tensor::id() const { return deref(node_).id; }

Tensor apply_primitive(Op kind, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  Matrix out;
  switch (kind) {
    case Op::matmul: {
      expect_arity(kind, inputs, 2);
      out = forward_matmul(inputs[0].value(), inputs[1].value(), attrs.transpose_rhs);
      break;
    }
    case Op::add_bias: {
      expect_arity(kind, inputs, 2);
      const Matrix& x = inputs[0].value();
      const Matrix& b = inputs[1].value();
      if (b.rows != 1 || b.cols != x.cols) shape_error(kind, x, b);
      out = x;
      for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) += b(0, j);
      }
      break;
    }
    case Op::relu: {
      expect_arity(kind, inputs, 1);
      out = inputs[0].value();
      for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
      break;
    }
    case Op::sigmoid: {
      expect_arity(kind, inputs, 1);
      out = inputs[0].value();
      for (auto& v : out.data) {
        v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      }
      break;
    }
    case Op::concat: {
      if (inputs.empty()) throw ShapeError("concat: no inputs");
      for (const auto& t : inputs) {
        if (!t) throw ValueError("concat: empty tensor input");
      }
      const Matrix& first = inputs[0].value();
      std::size_t total = 0;
      for (const auto& t : inputs) {
        if (t.rows() != first.rows) shape_error(kind, first, t.value());
        total += t.cols();
      }
      out = Matrix(first.rows, total);
      std::size_t offset = 0;
      for (const auto& t : inputs) {
        const Matrix& p = t.value();
        for (std::size_t i = 0; i < p.rows; ++i) {
          for (std::size_t j = 0; j < p.cols; ++j) out(i, offset + j) = p(i, j);
        }
        offset += p.cols;
      }
      break;
    }
    case Op::hadamard:
    case Op::add: {
      expect_arity(kind, inputs, 2);
      const Matrix& a = inputs[0].value();
      const Matrix& b = inputs[1].value();
      if (!a.same_shape(b)) shape_error(kind, a, b);
      out = a;
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = kind == Op::add ? a.data[i] + b.data[i] : a.data[i] * b.data[i];
      }
      break;
    }
    case Op::zero_mask: {
      expect_arity(kind, inputs, 1);
      out = Matrix(inputs[0].rows(), inputs[0].cols());
      break;
    }
    case Op::grad_scale: {
      expect_arity(kind, inputs, 1);
      if (!(attrs.scale >= 0.0) || !std::isfinite(attrs.scale)) {
        throw ValueError("grad_scale: scale must be finite and non-negative, got " +
                         std::to_string(attrs.scale));
      }
      out = inputs[0].value();
      break;
    }
    case Op::row_scale: {
      expect_arity(kind, inputs, 2);
      const Matrix& x = inputs[0].value();
      const Matrix& s = inputs[1].value();
      if (s.cols != 1 || s.rows != x.rows) shape_error(kind, x, s);
      out = x;
      for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) *= s(i, 0);
      }
      break;
    }
    case Op::slice_cols: {
      expect_arity(kind, inputs, 1);
      const Matrix& x = inputs[0].value();
      if (attrs.begin >= attrs.end || attrs.end > x.cols) {
        throw ShapeError("slice_cols: range [" + std::to_string(attrs.begin) + ", " +
                         std::to_string(attrs.end) + ") invalid for " + x.shape_string());
      }
      out = Matrix(x.rows, attrs.end - attrs.begin);
      for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = attrs.begin; j < attrs.end; ++j) out(i, j - attrs.begin) = x(i, j);
      }
      break;
    }
    case Op::softmax_rows: {
      expect_arity(kind, inputs, 1);
      if (inputs[0].cols() == 0) throw ShapeError("softmax_rows: zero columns");
      out = row_softmax(inputs[0].value());
      break;
    }
    case Op::cross_entropy:
      throw ValueError("cross_entropy: use softmax_cross_entropy, which takes labels");
  }
  return Tensor(make_node(std::move(out), record(kind, inputs, attrs)));
}

namespace {

Tensor unary(Op kind, const Tensor& x, const OpAttrs& attrs = {}) {
  const std::array<Tensor, 1> in{x};
  return apply_primitive(kind, in, attrs);
}

Tensor binary(Op kind, const Tensor& a, const Tensor& b, const OpAttrs& attrs = {}) {
  const std::array<Tensor, 2> in{a, b};
  return apply_primitive(kind, in, attrs);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return binary(Op::matmul, a, b); }

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  OpAttrs attrs;
  attrs.transpose_rhs = true;
  return binary(Op::matmul, a, b, attrs);
}

Tensor add_bias(const Tensor& x, const Tensor& bias) { return binary(Op::add_bias, x, bias); }

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_bias(matmul_nt(x, weight), bias);
}

Tensor relu(const Tensor& x) { return unary(Op::relu, x); }
Tensor sigmoid(const Tensor& x) { return unary(Op::sigmoid, x); }
Tensor concat(std::span<const Tensor> parts) { return apply_primitive(Op::concat, parts); }
Tensor hadamard(const Tensor& a, const Tensor& b) { return binary(Op::hadamard, a, b); }
Tensor add(const Tensor& a, const Tensor& b) { return binary(Op::add, a, b); }
Tensor zero_mask(const Tensor& x) { return unary(Op::zero_mask, x); }

Tensor grad_scale(const Tensor& x, double scale) {
  OpAttrs attrs;
  attrs.scale = scale;
  return unary(Op::grad_scale, x, attrs);
}

Tensor row_scale(const Tensor& x, const Tensor& s) { return binary(Op::row_scale, x, s); }

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  OpAttrs attrs;
  attrs.begin = begin;
  attrs.end = end;
  return unary(Op::slice_cols, x, attrs);
}

Tensor softmax_rows(const Tensor& x) { return unary(Op::softmax_rows, x); }

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const Matrix& z = logits.value();
  if (z.rows == 0) throw ValueError("softmax_cross_entropy: empty batch");
  if (labels.size() != z.rows) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for logits " + z.shape_string());
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= z.cols) {
      throw ValueError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                       " at index " + std::to_string(i) + " outside [0, " +
                       std::to_string(z.cols) + ")");
    }
  }
  auto rec = record(Op::cross_entropy, std::span<const Tensor>(&logits, 1), {});
  rec->labels.assign(labels.begin(), labels.end());
  rec->saved = row_softmax(z);
  double loss = 0.0;
  for (std::size_t i = 0; i < z.rows; ++i) {
    auto r = z.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double v : r) sum += std::exp(v - mx);
    loss += std::log(sum) + mx - r[static_cast<std::size_t>(labels[i])];
  }
  loss /= static_cast<double>(z.rows);
  return Tensor(make_node(Matrix(1, 1, loss), std::move(rec)));
}

void set_grad_scale(const Tensor& hook, double scale) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw ValueError("grad_scale: scale must be finite and non-negative, got " +
                     std::to_string(scale));
  }
  hook_record(hook).attrs.scale = scale;
}

double grad_scale_of(const Tensor& hook) { return hook_record(hook).attrs.scale; }

GradScaleStats grad_scale_stats(const Tensor& hook) { return hook_record(hook).stats; }

std::vector<Tensor> backward(const Tensor& loss) {
  if (!loss) throw ValueError("backward: empty loss tensor");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + loss.value().shape_string());
  }
  auto nodes = reachable(loss.node());
  for (auto& n : nodes) {
    if (n->op) std::fill(n->grad.data.begin(), n->grad.data.end(), 0.0);
  }
  loss.node()->grad.data[0] += 1.0;
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if ((*it)->op) propagate(**it);
  }
  std::vector<Tensor> leaves;
  for (auto& n : nodes) {
    if (!n->op) leaves.emplace_back(n);
  }
  return leaves;
}

namespace {

// Sign pattern (-1, 0, +1) of every relu input reachable from `root`.
std::vector<char> relu_signature(const Tensor& root) {
  std::vector<char> sig;
  for (const auto& n : reachable(root.node())) {
    if (!n->op || n->op->kind != Op::relu) continue;
    for (double v : n->op->inputs[0]->value.data) sig.push_back(v > 0.0 ? 1 : (v < 0.0 ? -1 : 0));
  }
  return sig;
}

double finite_value(const Tensor& t) {
  const double v = t.item();
  if (!std::isfinite(v)) throw ValueError("finite_difference_check: non-finite forward value");
  return v;
}

}  // namespace

FiniteDifferenceReport finite_difference_check(const std::function<Tensor()>& build,
                                               std::span<const Tensor> params, double eps) {
  if (!(eps > 0.0)) throw ValueError("finite_difference_check: eps must be positive");
  std::vector<Tensor> ps(params.begin(), params.end());
  for (auto& p : ps) {
    if (!p.is_leaf()) throw ValueError("finite_difference_check: parameters must be leaves");
    p.zero_grad();
  }
  const Tensor loss = build();
  finite_value(loss);
  backward(loss);
  const auto base_sig = relu_signature(loss);

  FiniteDifferenceReport report;
  for (auto& p : ps) {
    const Matrix analytic = p.grad();
    Matrix& values = p.mutable_value();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values.data[i];
      values.data[i] = original + eps;
      const Tensor plus = build();
      const bool plus_kink = relu_signature(plus) != base_sig;
      const double f_plus = finite_value(plus);
      values.data[i] = original - eps;
      const Tensor minus = build();
      const bool minus_kink = relu_signature(minus) != base_sig;
      const double f_minus = finite_value(minus);
      values.data[i] = original;
      if (plus_kink || minus_kink) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic.data[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      report.max_rel_error = std::max(report.max_rel_error, std::abs(a - numeric) / denom);
      ++report.checked;
    }
  }
  // Leave the caller with the analytic gradients of the unperturbed graph.
  for (auto& p : ps) p.zero_grad();
  backward(build());
  return report;
}

}  // namespace arl::ad
