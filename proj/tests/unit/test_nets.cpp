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

#include <algorithm>
#include <numeric>
#include <set>

#include "../support/support.hpp"
#include "cotpcc/errors.hpp"
#include "cotpcc/losses.hpp"
#include "cotpcc/nets.hpp"

using namespace cotpcc;
using cotpcc::testing::random_points;

namespace {

NetConfig small_config() {
  NetConfig c;
  return c;
}

Points permute_rows(const Points& p, const std::vector<Index>& perm) {
  Points out(p.rows(), 3);
  for (Index i = 0; i < p.rows(); ++i) out.row(i) = p.row(perm[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<Index> shuffled(Index n, std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<Index>(perm));
  return perm;
}

// Probes `count` random scalars spread over `params`.
}  // namespace

TEST_CASE("size laws") {
  CHECK(latent_size(1024, {0.5, 0.5, 0.5}) == 128);
  CHECK(latent_size(999, {1.0 / 3, 0.5, 0.5}) == 84);
  for (double a : {0.5, 1.0 / 3}) {
    for (double b : {0.5, 1.0 / 3}) {
      for (double c : {0.5, 1.0 / 3}) {
        for (Index n : {1024, 999, 777, 2048}) {
          const auto m1 = static_cast<Index>(std::ceil(static_cast<double>(n) * a - 1e-9));
          const auto m2 = static_cast<Index>(std::ceil(static_cast<double>(m1) * b - 1e-9));
          const auto m3 = static_cast<Index>(std::ceil(static_cast<double>(m2) * c - 1e-9));
          CHECK(latent_size(n, {a, b, c}) == m3);
        }
      }
    }
  }
  CHECK_THROWS_AS(stage_size(10, 0.0), InvalidArgument);
}

TEST_CASE("significance select hand examples") {
  Matrix f(4, 3);
  f << 1, 0, 0, 0, 1, 0, 0, 0, 1, .5, .5, .5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto idx = significance_select(f, 0.5, seed);
    REQUIRE(idx.size() == 2);
    for (Index i : idx) CHECK(i < 3);
    CHECK(idx == significance_select(f, 0.5, seed));
  }

  // Row 0 dominates every column; quota 3 needs the top-3 expansion.
  Matrix g(6, 3);
  g << 9, 9, 9,  //
      5, 0, 0,   //
      0, 5, 0,   //
      0, 0, 5,   //
      4, 1, 1,   //
      -1, -1, -1;
  const auto idx = significance_select(g, 0.5, 3);
  REQUIRE(idx.size() == 3);
  CHECK(idx[0] == 0);
  // top-3 per column: {0,1,4}, {0,2,4}, {0,3,4} -> row 5 never eligible.
  for (Index i : idx) CHECK(i != 5);

  const Matrix r = Matrix::Random(20, 8);
  std::vector<Index> all(20);
  std::iota(all.begin(), all.end(), 0);
  CHECK(significance_select(r, 1.0, 1) == all);
  CHECK_THROWS_AS(significance_select(r, 0.0, 1), InvalidArgument);
}

TEST_CASE("significance select is unique, sized, and permutation invariant") {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    const Index n = 40 + 7 * t;
    Matrix f(n, 16);
    for (Index i = 0; i < f.size(); ++i) f.data()[i] = rng.uniform();
    const double r = t % 2 ? 0.5 : 1.0 / 3;
    const auto idx = significance_select(f, r, 11);
    CHECK(static_cast<Index>(idx.size()) == stage_size(n, r));
    CHECK(std::set<Index>(idx.begin(), idx.end()).size() == idx.size());

    const auto perm = shuffled(n, 100 + t);
    Matrix fp(n, 16);
    for (Index i = 0; i < n; ++i) fp.row(i) = f.row(perm[static_cast<std::size_t>(i)]);
    std::set<Index> mapped;
    for (Index i : significance_select(fp, r, 11)) mapped.insert(perm[static_cast<std::size_t>(i)]);
    CHECK(mapped == std::set<Index>(idx.begin(), idx.end()));
  }
}

TEST_CASE("sampler features: shape, equivariance, absolute position") {
  nn::ParamStore store("sampler");
  Rng rng(1);
  const Sampler sampler(store, small_config(), rng);
  const Points p = random_points(64, 2);
  const Matrix f = sampler.features(p);
  CHECK(f.rows() == 64);
  CHECK(f.cols() == 1024);
  CHECK(f.allFinite());

  const auto perm = shuffled(64, 3);
  const Matrix fp = sampler.features(permute_rows(p, perm));
  double worst = 0.0;
  for (Index i = 0; i < 64; ++i) worst = std::max(worst, (fp.row(i) - f.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff());
  CHECK(worst <= 1e-4 * std::max(1.0, f.cwiseAbs().maxCoeff()));

  // Two identical clusters far apart: rows differ because the lift sees
  // absolute coordinates.
  Points two(64, 3);
  const Points cluster = random_points(32, 4, -0.1, 0.1);
  two.topRows(32) = cluster.rowwise() + Eigen::RowVector3d(-0.7, 0, 0);
  two.bottomRows(32) = cluster.rowwise() + Eigen::RowVector3d(0.7, 0, 0);
  const Matrix ft = sampler.features(two);
  CHECK((ft.topRows(32) - ft.bottomRows(32)).cwiseAbs().maxCoeff() > 1e-6);

  CHECK_THROWS_AS(sampler.features(random_points(10, 1)), InvalidArgument);
}

TEST_CASE("encoder shapes and degenerate ratios") {
  nn::ParamStore s("sampler"), e("encoder");
  Rng rng(2);
  const Encoder enc(s, e, small_config(), rng);
  const Points p = random_points(1024, 5);
  const auto out = enc.forward(p, {0.5, 0.5, 0.5}, SamplerKind::kLearned, 1);
  CHECK(out.p3.rows() == 128);
  CHECK(out.f3.rows() == 128);
  CHECK(out.f3.cols() == 8);
  CHECK(out.f3.value().allFinite());
  CHECK(enc.forward(p, {0.5, 0.5, 0.5}, SamplerKind::kFps, 1).p3.rows() == 128);

  const Points q = random_points(64, 6);
  const auto full = enc.forward(q, {1.0, 1.0, 1.0}, SamplerKind::kLearned, 1);
  std::set<std::array<double, 3>> a, b;
  for (Index i = 0; i < 64; ++i) {
    a.insert({q(i, 0), q(i, 1), q(i, 2)});
    b.insert({full.p3.value()(i, 0), full.p3.value()(i, 1), full.p3.value()(i, 2)});
  }
  CHECK(a == b);

  // Reusing a selection reproduces the pass.
  const auto again = enc.forward(p, {0.5, 0.5, 0.5}, SamplerKind::kLearned, 99, &out.stage_indices);
  CHECK(again.f3.value() == out.f3.value());

  CHECK_THROWS_AS(enc.forward(random_points(40, 1), {0.5, 0.5, 0.5}, SamplerKind::kFps, 1), InvalidArgument);
}

TEST_CASE("decoder shape and clamp") {
  nn::ParamStore store("decoder");
  Rng rng(3);
  const Decoder dec(store, small_config(), rng);
  const Var p3 = ad::constant(Matrix(random_points(128, 7)));
  const Var f3 = ad::constant(Matrix::Random(128, 8) * 5.0);
  const Var out = dec.forward(p3, f3, {0.5, 0.5, 0.5}, 1024);
  CHECK(out.rows() == 1024);
  CHECK(out.value().allFinite());
  CHECK(out.value().cwiseAbs().maxCoeff() <= 1.2);
  // Padding path: odd targets and 1/3 ratios.
  CHECK(dec.forward(p3, f3, {1.0 / 3, 0.5, 0.5}, 1500).rows() == 1500);
}

TEST_CASE("decoder parameter gradient matches finite differences") {
  nn::ParamStore store("decoder");
  Rng rng(4);
  const Decoder dec(store, small_config(), rng);
  const Var p3 = ad::constant(Matrix(random_points(32, 8, -0.6, 0.6)));
  const Var f3 = ad::constant(Matrix::Random(32, 8));
  const Var target = ad::constant(Matrix(random_points(256, 9, -0.8, 0.8)));
  auto loss = [&] { return chamfer_var(dec.forward(p3, f3, {0.5, 0.5, 0.5}, 256), target); };
  const auto params = store.vars();
  const auto grads = ad::grad(loss(), params);
  const auto stats = cotpcc::testing::probe_parameters(params, grads, [&] { return loss().item(); }, 50, 10, 1e-4, 1e-4);
  CAPTURE(stats.worst);
  CHECK(stats.fraction() >= 0.95);
}

TEST_CASE("discriminator: symmetry, zero head, input gradient") {
  nn::ParamStore store("critic");
  Rng rng(5);
  const Discriminator d(store, small_config(), rng);
  const Points p = random_points(16, 11);
  const double s = d.score(p);
  CHECK(std::isfinite(s));
  CHECK(std::abs(d.score(permute_rows(p, shuffled(16, 2))) - s) <= 1e-6);

  nn::ParamStore zstore("critic");
  Rng zrng(5);
  const Discriminator z(zstore, small_config(), zrng, true);
  CHECK(z.score(p) == 0.0);
  CHECK(z.score(random_points(100, 3)) == 0.0);

  Var x(Matrix(p), true);
  const auto g = ad::grad(d.forward(x), std::span<const Var>(&x, 1));
  const auto stats = cotpcc::testing::finite_difference_check(
      x, [&] { return d.score(Points(x.value())); }, g[0].value(), 48, 6, 1e-5, 1e-4, 1e-10);
  CAPTURE(stats.worst);
  CHECK(stats.fraction() >= 0.95);
}
