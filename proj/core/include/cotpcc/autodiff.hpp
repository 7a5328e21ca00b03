// Copyright 2026 The cotpcc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COTPCC_AUTODIFF_HPP_
#define COTPCC_AUTODIFF_HPP_

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// Every value is a 2-D matrix (rows = points, columns = channels). Operations
// record a node holding their inputs and a backward closure. Backward
// closures are themselves written in terms of recorded operations, so
// `grad(..., create_graph = true)` yields gradients that can be
// differentiated again. Operations whose backward captures forward values as
// constants are marked once-differentiable and refuse to be traversed when a
// differentiable gradient graph is requested.

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace cotpcc::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

class Var;
struct Node;

using BackwardFn = std::function<std::vector<Var>(const Var& grad_out, const Matrix& out_value)>;

struct Node {
  Matrix value;
  std::vector<Var> inputs;
  BackwardFn backward;
  bool requires_grad = false;
  bool twice_differentiable = true;
  std::string_view op = "leaf";
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  // Only meaningful on leaves (parameters); used by optimizers.
  Matrix& mutable_value() { return node_->value; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  double item() const;
  const std::shared_ptr<Node>& node() const { return node_; }
  // Same value, no history.
  Var detach() const { return Var(node_->value); }

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled();

// Disables graph recording within its scope.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds a recorded result. `backward` receives d(output) and must return one
// entry per input (an undefined Var means "no gradient").
Var make_op(Matrix value, std::vector<Var> inputs, BackwardFn backward, std::string_view name,
            bool twice_differentiable = true);

// Gradients of a scalar `output` with respect to `inputs`. Inputs that do not
// influence the output receive zeros.
std::vector<Var> grad(const Var& output, std::span<const Var> inputs, bool create_graph = false);

Var constant(Matrix value);
Var zeros(Index rows, Index cols);
Var scalar(double v);

// Linear algebra and elementwise arithmetic.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var mul_const(const Var& a, const Matrix& m);
Var add_row(const Var& a, const Var& row);        // a + 1 * row
Var mul_row(const Var& a, const Var& row);        // a .* (1 * row)
Var mul_col(const Var& a, const Var& col);        // a .* (col * 1)
Var broadcast_rows(const Var& row, Index n);      // n copies of a 1 x c row
Var broadcast_scalar(const Var& s, Index rows, Index cols);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);
Var col_sum(const Var& a);
Var col_mean(const Var& a);
Var col_max(const Var& a);
Var row_sum(const Var& a);

// Pointwise nonlinearities.
Var leaky_relu(const Var& a, double slope = 0.2);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);
Var reciprocal(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// Structural operations.
Var gather_rows(const Var& a, std::span<const Index> idx);
Var scatter_add_rows(const Var& a, std::span<const Index> idx, Index n_rows);
Var repeat_rows(const Var& a, Index k);  // each row repeated k times in place
Var group_sum(const Var& a, Index k);    // consecutive groups of k rows
Var group_max(const Var& a, Index k);
Var group_softmax(const Var& a, Index k);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, Index begin, Index count);
Var slice_rows(const Var& a, Index begin, Index count);
Var reshape(const Var& a, Index rows, Index cols);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator-(const Var& a) { return neg(a); }

}  // namespace cotpcc::ad

#endif  // COTPCC_AUTODIFF_HPP_
