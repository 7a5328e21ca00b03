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

#include "cotpcc/autodiff.hpp"

#include <cassert>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>

namespace cotpcc::ad {
namespace {

thread_local bool g_grad_enabled = true;

class GradModeScope {
 public:
  explicit GradModeScope(bool enabled) : previous_(g_grad_enabled) { g_grad_enabled = enabled; }
  ~GradModeScope() { g_grad_enabled = previous_; }

 private:
  bool previous_;
};

bool any_requires(const std::vector<Var>& inputs) {
  for (const auto& v : inputs) {
    if (v.requires_grad()) return true;
  }
  return false;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

using IndexList = std::shared_ptr<const std::vector<Index>>;

Var gather_impl(const Var& a, IndexList idx);
Var scatter_impl(const Var& a, IndexList idx, Index n_rows);

}  // namespace

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::item() const {
  if (rows() != 1 || cols() != 1) throw std::logic_error("item() on a non-scalar");
  return node_->value(0, 0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_op(Matrix value, std::vector<Var> inputs, BackwardFn backward, std::string_view name,
            bool twice_differentiable) {
  if (!g_grad_enabled || !any_requires(inputs)) return Var(std::move(value));
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  node->requires_grad = true;
  node->twice_differentiable = twice_differentiable;
  node->op = name;
  return Var(std::move(node));
}

std::vector<Var> grad(const Var& output, std::span<const Var> inputs, bool create_graph) {
  if (output.rows() != 1 || output.cols() != 1) throw std::invalid_argument("grad: output must be a scalar");

  // Iterative post-order DFS over nodes that carry history.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  if (output.requires_grad()) {
    std::vector<std::pair<Node*, std::size_t>> stack{{output.node().get(), 0}};
    visited.insert(output.node().get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        Node* child = node->inputs[next++].node().get();
        if (child != nullptr && child->requires_grad && visited.insert(child).second) {
          stack.emplace_back(child, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::unordered_map<Node*, Var> grads;
  {
    GradModeScope scope(create_graph);
    if (output.requires_grad()) grads[output.node().get()] = constant(Matrix::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      auto found = grads.find(node);
      if (found == grads.end() || !node->backward) continue;
      if (create_graph && !node->twice_differentiable) {
        throw std::logic_error("grad: operation '" + std::string(node->op) +
                               "' does not support higher-order gradients");
      }
      const Var g = found->second;
      std::vector<Var> input_grads = node->backward(g, node->value);
      for (std::size_t j = 0; j < node->inputs.size(); ++j) {
        const Var& in = node->inputs[j];
        if (!in.requires_grad() || j >= input_grads.size() || !input_grads[j].defined()) continue;
        Node* key = in.node().get();
        auto slot = grads.find(key);
        if (slot == grads.end()) {
          grads.emplace(key, input_grads[j]);
        } else {
          slot->second = add(slot->second, input_grads[j]);
        }
      }
    }
  }

  std::vector<Var> result;
  result.reserve(inputs.size());
  for (const Var& in : inputs) {
    auto found = in.defined() ? grads.find(in.node().get()) : grads.end();
    if (found != grads.end()) {
      result.push_back(found->second);
    } else {
      result.push_back(zeros(in.rows(), in.cols()));
    }
  }
  return result;
}

Var constant(Matrix value) { return Var(std::move(value)); }
Var zeros(Index rows, Index cols) { return Var(Matrix::Zero(rows, cols)); }
Var scalar(double v) { return Var(Matrix::Constant(1, 1, v)); }

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix out = a.value() * b.value();
  return make_op(std::move(out), {a, b},
                 [a, b](const Var& g, const Matrix&) -> std::vector<Var> {
                   Var ga, gb;
                   if (!grad_enabled()) {
                     if (a.requires_grad()) ga = constant(g.value() * b.value().transpose());
                     if (b.requires_grad()) gb = constant(a.value().transpose() * g.value());
                   } else {
                     if (a.requires_grad()) ga = matmul(g, transpose(b));
                     if (b.requires_grad()) gb = matmul(transpose(a), g);
                   }
                   return {ga, gb};
                 },
                 "matmul");
}

Var transpose(const Var& a) {
  Matrix out = a.value().transpose();
  return make_op(std::move(out), {a},
                 [](const Var& g, const Matrix&) -> std::vector<Var> { return {transpose(g)}; }, "transpose");
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make_op(a.value() + b.value(), {a, b},
                 [](const Var& g, const Matrix&) -> std::vector<Var> { return {g, g}; }, "add");
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make_op(a.value() - b.value(), {a, b},
                 [](const Var& g, const Matrix&) -> std::vector<Var> { return {g, neg(g)}; }, "sub");
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return make_op(std::move(out), {a, b},
                 [a, b](const Var& g, const Matrix&) -> std::vector<Var> {
                   Var ga, gb;
                   if (a.requires_grad()) ga = mul(g, b);
                   if (b.requires_grad()) gb = mul(g, a);
                   return {ga, gb};
                 },
                 "mul");
}

Var neg(const Var& a) {
  return make_op(-a.value(), {a}, [](const Var& g, const Matrix&) -> std::vector<Var> { return {neg(g)}; },
                 "neg");
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a},
                 [s](const Var& g, const Matrix&) -> std::vector<Var> { return {scale(g, s)}; }, "scale");
}

Var add_scalar(const Var& a, double s) {
  Matrix out = a.value().array() + s;
  return make_op(std::move(out), {a}, [](const Var& g, const Matrix&) -> std::vector<Var> { return {g}; },
                 "add_scalar");
}

Var mul_const(const Var& a, const Matrix& m) {
  if (a.rows() != m.rows() || a.cols() != m.cols()) throw std::invalid_argument("mul_const: shape mismatch");
  auto held = std::make_shared<const Matrix>(m);
  Matrix out = a.value().cwiseProduct(m);
  return make_op(std::move(out), {a},
                 [held](const Var& g, const Matrix&) -> std::vector<Var> { return {mul_const(g, *held)}; },
                 "mul_const");
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_op(std::move(out), {a, row},
                 [](const Var& g, const Matrix&) -> std::vector<Var> { return {g, col_sum(g)}; }, "add_row");
}

Var mul_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("mul_row: shape mismatch");
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return make_op(std::move(out), {a, row},
                 [a, row](const Var& g, const Matrix&) -> std::vector<Var> {
                   Var ga, gr;
                   if (a.requires_grad()) ga = mul_row(g, row);
                   if (row.requires_grad()) gr = col_sum(mul(g, a));
                   return {ga, gr};
                 },
                 "mul_row");
}

Var mul_col(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw std::invalid_argument("mul_col: shape mismatch");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return make_op(std::move(out), {a, col},
                 [a, col](const Var& g, const Matrix&) -> std::vector<Var> {
                   Var ga, gc;
                   if (a.requires_grad()) ga = mul_col(g, col);
                   if (col.requires_grad()) gc = row_sum(mul(g, a));
                   return {ga, gc};
                 },
                 "mul_col");
}

Var broadcast_rows(const Var& row, Index n) {
  if (row.rows() != 1) throw std::invalid_argument("broadcast_rows: expects a single row");
  Matrix out = row.value().replicate(n, 1);
  return make_op(std::move(out), {row},
                 [](const Var& g, const Matrix&) -> std::vector<Var> { return {col_sum(g)}; }, "broadcast_rows");
}

Var broadcast_scalar(const Var& s, Index rows, Index cols) {
  if (s.rows() != 1 || s.cols() != 1) throw std::invalid_argument("broadcast_scalar: expects a scalar");
  Matrix out = Matrix::Constant(rows, cols, s.value()(0, 0));
  return make_op(std::move(out), {s}, [](const Var& g, const Matrix&) -> std::vector<Var> { return {sum(g)}; },
                 "broadcast_scalar");
}

Var sum(const Var& a) {
  const Index r = a.rows(), c = a.cols();
  return make_op(Matrix::Constant(1, 1, a.value().sum()), {a},
                 [r, c](const Var& g, const Matrix&) -> std::vector<Var> { return {broadcast_scalar(g, r, c)}; },
                 "sum");
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.rows() * a.cols());
  return scale(sum(a), 1.0 / n);
}

Var col_sum(const Var& a) {
  const Index n = a.rows();
  Matrix out = a.value().colwise().sum();
  return make_op(std::move(out), {a},
                 [n](const Var& g, const Matrix&) -> std::vector<Var> { return {broadcast_rows(g, n)}; },
                 "col_sum");
}

Var col_mean(const Var& a) { return scale(col_sum(a), 1.0 / static_cast<double>(a.rows())); }

Var col_max(const Var& a) {
  const Matrix& v = a.value();
  const Index n = v.rows(), c = v.cols();
  if (n == 0) throw std::invalid_argument("col_max: empty input");
  Matrix out(1, c);
  Matrix mask = Matrix::Zero(n, c);
  for (Index j = 0; j < c; ++j) {
    Index best = 0;
    for (Index i = 1; i < n; ++i) {
      if (v(i, j) > v(best, j)) best = i;
    }
    out(0, j) = v(best, j);
    mask(best, j) = 1.0;
  }
  auto held = std::make_shared<const Matrix>(std::move(mask));
  return make_op(std::move(out), {a},
                 [held, n](const Var& g, const Matrix&) -> std::vector<Var> {
                   return {mul_const(broadcast_rows(g, n), *held)};
                 },
                 "col_max");
}

Var row_sum(const Var& a) {
  const Index c = a.cols();
  Matrix out = a.value().rowwise().sum();
  return make_op(std::move(out), {a},
                 [c](const Var& g, const Matrix&) -> std::vector<Var> {
                   return {mul_col(constant(Matrix::Ones(g.rows(), c)), g)};
                 },
                 "row_sum");
}

Var leaky_relu(const Var& a, double slope) {
  const Matrix& v = a.value();
  Matrix mask = (v.array() > 0.0).select(Matrix::Ones(v.rows(), v.cols()), slope);
  Matrix out = v.cwiseProduct(mask);
  auto held = std::make_shared<const Matrix>(std::move(mask));
  return make_op(std::move(out), {a},
                 [held](const Var& g, const Matrix&) -> std::vector<Var> { return {mul_const(g, *held)}; },
                 "leaky_relu");
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh();
  return make_op(std::move(out), {a},
                 [a](const Var& g, const Matrix& y) -> std::vector<Var> {
                   if (!grad_enabled()) {
                     Matrix d = 1.0 - y.array().square();
                     return {constant(g.value().cwiseProduct(d))};
                   }
                   return {mul(g, add_scalar(neg(square(tanh(a))), 1.0))};
                 },
                 "tanh");
}

Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return make_op(std::move(out), {a},
                 [a](const Var& g, const Matrix& y) -> std::vector<Var> {
                   if (!grad_enabled()) {
                     Matrix d = y.array() * (1.0 - y.array());
                     return {constant(g.value().cwiseProduct(d))};
                   }
                   Var s = sigmoid(a);
                   return {mul(g, mul(s, add_scalar(neg(s), 1.0)))};
                 },
                 "sigmoid");
}

Var exp(const Var& a) {
  Matrix out = a.value().array().exp();
  return make_op(std::move(out), {a},
                 [a](const Var& g, const Matrix& y) -> std::vector<Var> {
                   if (!grad_enabled()) return {constant(g.value().cwiseProduct(y))};
                   return {mul(g, exp(a))};
                 },
                 "exp");
}

Var log(const Var& a) {
  Matrix out = a.value().array().log();
  return make_op(std::move(out), {a},
                 [a](const Var& g, const Matrix&) -> std::vector<Var> {
                   if (!grad_enabled()) return {constant(g.value().cwiseQuotient(a.value()))};
                   return {mul(g, reciprocal(a))};
                 },
                 "log");
}

Var square(const Var& a) {
  Matrix out = a.value().array().square();
  return make_op(std::move(out), {a},
                 [a](const Var& g, const Matrix&) -> std::vector<Var> {
                   if (!grad_enabled()) return {constant(2.0 * g.value().cwiseProduct(a.value()))};
                   return {scale(mul(g, a), 2.0)};
                 },
                 "square");
}

Var sqrt(const Var& a) {
  Matrix out = a.value().array().sqrt();
  return make_op(std::move(out), {a},
                 [a](const Var& g, const Matrix& y) -> std::vector<Var> {
                   if (!grad_enabled()) {
                     Matrix d = 0.5 / y.array();
                     return {constant(g.value().cwiseProduct(d))};
                   }
                   return {mul(g, scale(reciprocal(sqrt(a)), 0.5))};
                 },
                 "sqrt");
}

Var reciprocal(const Var& a) {
  Matrix out = a.value().array().inverse();
  return make_op(std::move(out), {a},
                 [a](const Var& g, const Matrix& y) -> std::vector<Var> {
                   if (!grad_enabled()) {
                     Matrix d = -y.array().square();
                     return {constant(g.value().cwiseProduct(d))};
                   }
                   return {mul(g, neg(square(reciprocal(a))))};
                 },
                 "reciprocal");
}

Var clamp(const Var& a, double lo, double hi) {
  const Matrix& v = a.value();
  Matrix mask = ((v.array() >= lo) && (v.array() <= hi)).cast<double>();
  Matrix out = v.cwiseMax(lo).cwiseMin(hi);
  auto held = std::make_shared<const Matrix>(std::move(mask));
  return make_op(std::move(out), {a},
                 [held](const Var& g, const Matrix&) -> std::vector<Var> { return {mul_const(g, *held)}; },
                 "clamp");
}

namespace {

Var gather_impl(const Var& a, IndexList idx) {
  const Matrix& v = a.value();
  const Index n = static_cast<Index>(idx->size());
  Matrix out(n, v.cols());
  for (Index i = 0; i < n; ++i) {
    const Index src = (*idx)[static_cast<std::size_t>(i)];
    if (src < 0 || src >= v.rows()) throw std::out_of_range("gather_rows: index out of range");
    out.row(i) = v.row(src);
  }
  const Index n_rows = v.rows();
  return make_op(std::move(out), {a},
                 [idx, n_rows](const Var& g, const Matrix&) -> std::vector<Var> {
                   return {scatter_impl(g, idx, n_rows)};
                 },
                 "gather_rows");
}

Var scatter_impl(const Var& a, IndexList idx, Index n_rows) {
  const Matrix& v = a.value();
  if (static_cast<Index>(idx->size()) != v.rows()) throw std::invalid_argument("scatter_add_rows: size mismatch");
  Matrix out = Matrix::Zero(n_rows, v.cols());
  for (Index i = 0; i < v.rows(); ++i) out.row((*idx)[static_cast<std::size_t>(i)]) += v.row(i);
  return make_op(std::move(out), {a},
                 [idx](const Var& g, const Matrix&) -> std::vector<Var> { return {gather_impl(g, idx)}; },
                 "scatter_add_rows");
}

}  // namespace

Var gather_rows(const Var& a, std::span<const Index> idx) {
  return gather_impl(a, std::make_shared<const std::vector<Index>>(idx.begin(), idx.end()));
}

Var scatter_add_rows(const Var& a, std::span<const Index> idx, Index n_rows) {
  return scatter_impl(a, std::make_shared<const std::vector<Index>>(idx.begin(), idx.end()), n_rows);
}

Var repeat_rows(const Var& a, Index k) {
  const Matrix& v = a.value();
  Matrix out(v.rows() * k, v.cols());
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index j = 0; j < k; ++j) out.row(i * k + j) = v.row(i);
  }
  return make_op(std::move(out), {a},
                 [k](const Var& g, const Matrix&) -> std::vector<Var> { return {group_sum(g, k)}; },
                 "repeat_rows");
}

Var group_sum(const Var& a, Index k) {
  const Matrix& v = a.value();
  if (k <= 0 || v.rows() % k != 0) throw std::invalid_argument("group_sum: rows not divisible by group size");
  const Index groups = v.rows() / k;
  Matrix out = Matrix::Zero(groups, v.cols());
  for (Index i = 0; i < groups; ++i) {
    for (Index j = 0; j < k; ++j) out.row(i) += v.row(i * k + j);
  }
  return make_op(std::move(out), {a},
                 [k](const Var& g, const Matrix&) -> std::vector<Var> { return {repeat_rows(g, k)}; },
                 "group_sum");
}

Var group_max(const Var& a, Index k) {
  const Matrix& v = a.value();
  if (k <= 0 || v.rows() % k != 0) throw std::invalid_argument("group_max: rows not divisible by group size");
  const Index groups = v.rows() / k;
  const Index c = v.cols();
  Matrix out(groups, c);
  Matrix mask = Matrix::Zero(v.rows(), c);
  for (Index i = 0; i < groups; ++i) {
    for (Index ch = 0; ch < c; ++ch) {
      Index best = i * k;
      for (Index j = 1; j < k; ++j) {
        if (v(i * k + j, ch) > v(best, ch)) best = i * k + j;
      }
      out(i, ch) = v(best, ch);
      mask(best, ch) = 1.0;
    }
  }
  auto held = std::make_shared<const Matrix>(std::move(mask));
  return make_op(std::move(out), {a},
                 [held, k](const Var& g, const Matrix&) -> std::vector<Var> {
                   return {mul_const(repeat_rows(g, k), *held)};
                 },
                 "group_max");
}

Var group_softmax(const Var& a, Index k) {
  Matrix shift;
  {
    NoGradGuard guard;
    shift = group_max(a.detach(), k).value();
  }
  Var e = exp(sub(a, repeat_rows(constant(std::move(shift)), k)));
  Var denom = group_sum(e, k);
  return mul(e, repeat_rows(reciprocal(denom), k));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Index n = parts[0].rows();
  Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != n) throw std::invalid_argument("concat_cols: row mismatch");
    total += p.cols();
  }
  Matrix out(n, total);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  std::vector<Index> widths;
  for (const auto& p : parts) widths.push_back(p.cols());
  return make_op(std::move(out), inputs,
                 [offsets, widths](const Var& g, const Matrix&) -> std::vector<Var> {
                   std::vector<Var> grads;
                   for (std::size_t i = 0; i < offsets.size(); ++i) {
                     grads.push_back(slice_cols(g, offsets[i], widths[i]));
                   }
                   return grads;
                 },
                 "concat_cols");
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const Index c = parts[0].cols();
  Index total = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw std::invalid_argument("concat_rows: column mismatch");
    total += p.rows();
  }
  Matrix out(total, c);
  std::vector<Index> offsets, heights;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    heights.push_back(p.rows());
    off += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return make_op(std::move(out), inputs,
                 [offsets, heights](const Var& g, const Matrix&) -> std::vector<Var> {
                   std::vector<Var> grads;
                   for (std::size_t i = 0; i < offsets.size(); ++i) {
                     grads.push_back(slice_rows(g, offsets[i], heights[i]));
                   }
                   return grads;
                 },
                 "concat_rows");
}

Var slice_cols(const Var& a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) throw std::out_of_range("slice_cols: range");
  const Index total = a.cols();
  Matrix out = a.value().middleCols(begin, count);
  return make_op(std::move(out), {a},
                 [begin, count, total](const Var& g, const Matrix&) -> std::vector<Var> {
                   std::vector<Var> parts;
                   if (begin > 0) parts.push_back(zeros(g.rows(), begin));
                   parts.push_back(g);
                   if (begin + count < total) parts.push_back(zeros(g.rows(), total - begin - count));
                   return {concat_cols(parts)};
                 },
                 "slice_cols");
}

Var slice_rows(const Var& a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) throw std::out_of_range("slice_rows: range");
  const Index total = a.rows();
  Matrix out = a.value().middleRows(begin, count);
  return make_op(std::move(out), {a},
                 [begin, count, total](const Var& g, const Matrix&) -> std::vector<Var> {
                   std::vector<Var> parts;
                   if (begin > 0) parts.push_back(zeros(begin, g.cols()));
                   parts.push_back(g);
                   if (begin + count < total) parts.push_back(zeros(total - begin - count, g.cols()));
                   return {concat_rows(parts)};
                 },
                 "slice_rows");
}

Var reshape(const Var& a, Index rows, Index cols) {
  if (rows * cols != a.rows() * a.cols()) throw std::invalid_argument("reshape: size mismatch");
  const Index r0 = a.rows(), c0 = a.cols();
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return make_op(std::move(out), {a},
                 [r0, c0](const Var& g, const Matrix&) -> std::vector<Var> { return {reshape(g, r0, c0)}; },
                 "reshape");
}

}  // namespace cotpcc::ad
