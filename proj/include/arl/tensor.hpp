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
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "arl/matrix.hpp"

namespace arl::ad {

// Primitive kinds understood by the graph. Every non-leaf tensor records exactly
// one of these together with its inputs.
enum class Op {
  matmul,
  add_bias,
  relu,
  sigmoid,
  concat,
  hadamard,
  zero_mask,
  grad_scale,
  add,
  row_scale,
  slice_cols,
  softmax_rows,
  cross_entropy,
};

std::string_view op_name(Op op);

// Looks up a primitive by name; throws ValueError for unknown names.
Op parse_op(std::string_view name);

struct OpAttrs {
  double scale = 1.0;          // grad_scale
  bool transpose_rhs = false;  // matmul: a * b^T
  std::size_t begin = 0;       // slice_cols [begin, end)
  std::size_t end = 0;
};

struct Node;

// Handle to a node of a define-by-run computation graph. Copies share the node.
// A default-constructed Tensor is empty.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Matrix value);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor scalar(double v);

  std::size_t rows() const;
  std::size_t cols() const;

  const Matrix& value() const;
  // Leaves only: in-place parameter updates.
  Matrix& mutable_value();
  const Matrix& grad() const;
  Matrix& mutable_grad();
  void zero_grad();

  // Value of a 1x1 tensor.
  double item() const;

  bool is_leaf() const;
  std::optional<Op> op() const;
  std::uint64_t id() const;

  explicit operator bool() const { return node_ != nullptr; }
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

// Generic entry point. Shape errors name the op and the offending shapes.
Tensor apply_primitive(Op kind, std::span<const Tensor> inputs, const OpAttrs& attrs = {});

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T, used for weights stored as (out x in).
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// x (B x n) plus a (1 x n) row broadcast over the batch.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// Column-wise concatenation; all inputs share the row count.
Tensor concat(std::span<const Tensor> parts);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
// All-zero tensor shaped like x. Passes no gradient back to x.
Tensor zero_mask(const Tensor& x);
// Identity forward; backward multiplies the upstream gradient by scale.
Tensor grad_scale(const Tensor& x, double scale = 1.0);
// x (B x n) with row i multiplied by s(i, 0); s is (B x 1).
Tensor row_scale(const Tensor& x, const Tensor& s);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor softmax_rows(const Tensor& x);

// Mean over the batch of -log softmax(logits)[label], computed with max
// subtraction. Returns a 1x1 tensor.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// Gradient-scale hook access. All throw ValueError if `hook` is not a
// grad_scale node.
void set_grad_scale(const Tensor& hook, double scale);
double grad_scale_of(const Tensor& hook);

// Norms observed by a grad_scale node during the most recent backward pass.
struct GradScaleStats {
  double upstream_norm = 0.0;
  double propagated_norm = 0.0;
};
GradScaleStats grad_scale_stats(const Tensor& hook);

// Reverse-mode sweep from a 1x1 loss. Intermediate gradients are reset first;
// leaf gradients accumulate, so callers zero them between steps. Returns the
// reachable leaves in construction order.
std::vector<Tensor> backward(const Tensor& loss);

struct FiniteDifferenceReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

// Compares analytic gradients of `build()` against central differences for
// every entry of `params`. `build` must read the current parameter values and
// return a 1x1 tensor. Entries whose perturbation flips the sign pattern of any
// relu input are skipped. Throws on a non-finite forward value.
FiniteDifferenceReport finite_difference_check(const std::function<Tensor()>& build,
                                               std::span<const Tensor> params,
                                               double eps = 1e-5);

}  // namespace arl::ad
