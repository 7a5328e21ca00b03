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


#include <doctest.h>

#include <functional>

#include "../support/support.hpp"
#include "cotpcc/autodiff.hpp"

using namespace cotpcc;
using ad::Matrix;
using ad::Var;

namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

// Checks d f / d x for a scalar function against central differences.
void check_op(const char* name, Matrix x0, const std::function<Var(const Var&)>& f, double tol = 1e-6) {
  CAPTURE(name);
  Var x(x0, true);
  const Var y = f(x);
  const auto g = ad::grad(y, std::span<const Var>(&x, 1));
  const auto stats = cotpcc::testing::finite_difference_check(
      x, [&] { return f(Var(x.value())).item(); }, g[0].value(), static_cast<int>(x0.size()), 3, 1e-6, tol);
  CHECK(stats.passed == stats.probed);
}

}  // namespace

TEST_CASE("first-order gradients of elementary ops") {
  const Matrix a = random_matrix(5, 4, 1);
  const Matrix w = random_matrix(4, 3, 2);
  const Matrix pos = a.cwiseAbs().array() + 0.2;
  check_op("matmul", a, [&](const Var& x) { return ad::sum(ad::square(ad::matmul(x, ad::constant(w)))); });
  check_op("tanh", a, [](const Var& x) { return ad::sum(ad::tanh(x)); });
  check_op("sigmoid", a, [](const Var& x) { return ad::sum(ad::square(ad::sigmoid(x))); });
  check_op("exp/log", pos, [](const Var& x) { return ad::sum(ad::log(ad::add_scalar(ad::exp(x), 1.0))); });
  check_op("sqrt", pos, [](const Var& x) { return ad::sum(ad::sqrt(x)); });
  check_op("reciprocal", pos, [](const Var& x) { return ad::sum(ad::reciprocal(x)); });
  check_op("col_max", a, [](const Var& x) { return ad::sum(ad::square(ad::col_max(x))); });
  check_op("col_mean", a, [](const Var& x) { return ad::sum(ad::square(ad::col_mean(x))); });
  check_op("row_sum", a, [](const Var& x) { return ad::sum(ad::square(ad::row_sum(x))); });
  check_op("group_max", a, [](const Var& x) { return ad::sum(ad::square(ad::group_max(ad::reshape(x, 10, 2), 5))); });
  check_op("group_softmax", a, [](const Var& x) {
    return ad::sum(ad::mul(ad::group_softmax(ad::reshape(x, 10, 2), 5), ad::constant(random_matrix(10, 2, 9))));
  });
  const std::vector<Index> idx{4, 0, 0, 2, 3, 1};
  check_op("gather", a, [&](const Var& x) { return ad::sum(ad::square(ad::gather_rows(x, idx))); });
  check_op("scatter", a, [&](const Var& x) {
    return ad::sum(ad::square(ad::scatter_add_rows(ad::slice_rows(x, 0, 3), std::vector<Index>{1, 1, 0}, 2)));
  });
  check_op("concat/slice", a, [](const Var& x) {
    const Var parts[] = {ad::slice_cols(x, 1, 2), ad::slice_rows(ad::transpose(x), 0, 2)};
    return ad::sum(ad::square(ad::concat_rows(std::vector<Var>{ad::transpose(parts[0]), parts[1]})));
  });
  check_op("broadcast", a, [](const Var& x) {
    const Var row = ad::slice_rows(x, 0, 1);
    return ad::sum(ad::square(ad::add(ad::mul_row(x, row), ad::broadcast_rows(row, 5))));
  });
  check_op("leaky_relu", a, [](const Var& x) { return ad::sum(ad::square(ad::leaky_relu(x, 0.2))); });
}

TEST_CASE("second-order gradients through create_graph") {
  // g(x) = || d/dx sum(tanh(x W))^2 ||^2; differentiate g by finite differences.
  const Matrix x0 = random_matrix(4, 3, 5);
  const Matrix w = random_matrix(3, 2, 6);
  auto inner = [&](const Var& x, bool create) {
    const Var y = ad::sum(ad::square(ad::tanh(ad::matmul(x, ad::constant(w)))));
    const auto g = ad::grad(y, std::span<const Var>(&x, 1), create);
    return ad::sum(ad::square(g[0]));
  };
  Var x(x0, true);
  const Var gnorm = inner(x, true);
  const auto second = ad::grad(gnorm, std::span<const Var>(&x, 1));
  const auto stats = cotpcc::testing::finite_difference_check(
      x,
      [&] {
        Var probe(x.value(), true);
        return inner(probe, false).item();
      },
      second[0].value(), 12, 4, 1e-6, 1e-5);
  CHECK(stats.passed == stats.probed);
}

TEST_CASE("no-grad guard produces constants") {
  Var x(random_matrix(2, 2, 1), true);
  ad::NoGradGuard guard;
  const Var y = ad::sum(ad::square(x));
  CHECK_FALSE(y.requires_grad());
}
