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


#include "cotpcc/losses.hpp"

#include <cmath>

#include "cotpcc/errors.hpp"
#include "cotpcc/knn.hpp"
#include "cotpcc/metrics.hpp"

namespace cotpcc {
namespace {

constexpr double kNormFloor = 1e-24;

void check_batch(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidArgument(std::string(what) + ": batch size mismatch (" + std::to_string(a) + " vs " +
                          std::to_string(b) + ")");
  }
  if (a == 0) throw InvalidArgument(std::string(what) + ": empty batch");
}

// Mean squared distance from each row of `from` to its nearest row of `to`.
Var directed(const Var& from, const Var& to) {
  const NearestResult nn = nearest_neighbors(from.value(), to.value());
  const Var diff = ad::sub(from, ad::gather_rows(to, nn.index));
  return ad::scale(ad::sum(ad::square(diff)), 1.0 / static_cast<double>(from.rows()));
}

}  // namespace

void LossWeights::validate() const {
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be non-negative");
  if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be non-negative");
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
}

bool LossBreakdown::finite() const {
  return std::isfinite(cost_c) && std::isfinite(d_wass) && std::isfinite(l_otr) && std::isfinite(rate_bpp) &&
         std::isfinite(total_gen) && std::isfinite(total_disc);
}

Var chamfer_var(const Var& a, const Var& b) {
  if (a.rows() == 0 || b.rows() == 0 || a.cols() != 3 || b.cols() != 3) {
    throw InvalidArgument("chamfer: both clouds must be non-empty N x 3");
  }
  return ad::add(directed(a, b), directed(b, a));
}

Var cost_c(std::span<const Var> x, std::span<const Var> xhat) {
  check_batch(x.size(), xhat.size(), "cost_c");
  Var total = chamfer_var(x[0], xhat[0]);
  for (std::size_t i = 1; i < x.size(); ++i) total = ad::add(total, chamfer_var(x[i], xhat[i]));
  return ad::scale(total, 1.0 / static_cast<double>(x.size()));
}

Var wasserstein_quadratic(std::span<const Var> jx, std::span<const Var> jxhat) {
  check_batch(jx.size(), jxhat.size(), "wasserstein_quadratic");
  Var total = ad::square(ad::sub(jx[0], jxhat[0]));
  for (std::size_t i = 1; i < jx.size(); ++i) total = ad::add(total, ad::square(ad::sub(jx[i], jxhat[i])));
  return ad::scale(total, 1.0 / static_cast<double>(jx.size()));
}

Var ot_regularizer(std::span<const Points> x, std::span<const double> costs, const CriticFn& critic,
                   bool create_graph) {
  check_batch(x.size(), costs.size(), "ot_regularizer");
  Var total;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Var xi(Matrix(x[i]), /*requires_grad=*/true);
    const Var j = critic(xi);
    const std::vector<Var> inputs{xi};
    const Var g = ad::grad(j, inputs, create_graph)[0];
    if (!g.value().allFinite()) {
      throw DivergenceError("ot_regularizer: non-finite critic gradient for sample " + std::to_string(i));
    }
    const Var norm = ad::sqrt(ad::add_scalar(ad::sum(ad::square(g)), kNormFloor));
    const Var term = ad::square(ad::add_scalar(norm, -costs[i]));
    total = total.defined() ? ad::add(total, term) : term;
  }
  return ad::scale(total, 1.0 / static_cast<double>(x.size()));
}

Var ot_regularizer(std::span<const Points> x, std::span<const double> costs, const Discriminator& critic,
                   bool create_graph) {
  return ot_regularizer(x, costs, CriticFn([&critic](const Var& v) { return critic.forward(v); }), create_graph);
}

Var ot_loss(std::span<const Points> x, std::span<const Var> xhat, const Discriminator& critic,
            const LossWeights& weights, LossBreakdown* breakdown) {
  check_batch(x.size(), xhat.size(), "ot_loss");
  std::vector<Var> xs, jx, jxhat;
  std::vector<double> costs;
  Var c;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xs.push_back(ad::constant(Matrix(x[i])));
    const Var ci = chamfer_var(xs.back(), xhat[i]);
    costs.push_back(ci.item());
    c = c.defined() ? ad::add(c, ci) : ci;
    jx.push_back(critic.forward(xs.back()));
    jxhat.push_back(critic.forward(xhat[i]));
  }
  c = ad::scale(c, 1.0 / static_cast<double>(x.size()));
  const Var d = wasserstein_quadratic(jx, jxhat);
  const double l = weights.gamma > 0.0 || breakdown != nullptr ? ot_regularizer(x, costs, critic, false).item() : 0.0;
  const Var total = ad::add_scalar(ad::add(c, ad::scale(d, weights.beta)), weights.gamma * l);
  if (breakdown != nullptr) {
    breakdown->cost_c = c.item();
    breakdown->d_wass = d.item();
    breakdown->l_otr = l;
    breakdown->total_gen = total.item() + weights.lambda * breakdown->rate_bpp;
    breakdown->total_disc = weights.beta * breakdown->d_wass - weights.gamma * l;
  }
  return total;
}

Var generator_objective(std::span<const Points> x, const Generator& generator, const Discriminator& critic,
                        const LossWeights& weights, std::uint64_t seed, LossBreakdown* breakdown) {
  std::vector<Var> xhat;
  Var bits;
  double points = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Generator::Output out = generator.forward(x[i], derive_seed(seed, i));
    xhat.push_back(out.xhat);
    // Bits per point of sample i, averaged over the batch.
    const Var bpp = ad::scale(ad::add(out.coord_bits, out.feature_bits), 1.0 / static_cast<double>(x[i].rows()));
    bits = bits.defined() ? ad::add(bits, bpp) : bpp;
    points += 1.0;
  }
  const Var rate = ad::scale(bits, 1.0 / points);
  LossBreakdown local;
  local.rate_bpp = rate.item();
  const Var l_ot = ot_loss(x, xhat, critic, weights, &local);
  if (breakdown != nullptr) *breakdown = local;
  return ad::add(l_ot, ad::scale(rate, weights.lambda));
}

Var discriminator_objective(std::span<const Points> x, std::span<const Points> xhat, const Discriminator& critic,
                            const LossWeights& weights, LossBreakdown* breakdown) {
  check_batch(x.size(), xhat.size(), "discriminator_objective");
  std::vector<Var> jx, jxhat;
  std::vector<double> costs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    jx.push_back(critic.forward(ad::constant(Matrix(x[i]))));
    jxhat.push_back(critic.forward(ad::constant(Matrix(xhat[i]))));
    costs.push_back(chamfer_l2(x[i], xhat[i]));
  }
  const Var d = wasserstein_quadratic(jx, jxhat);
  Var total = ad::scale(d, weights.beta);
  double l = 0.0;
  if (weights.gamma > 0.0) {
    const Var reg = ot_regularizer(x, costs, critic, true);
    l = reg.item();
    total = ad::sub(total, ad::scale(reg, weights.gamma));
  }
  if (breakdown != nullptr) {
    double c = 0.0;
    for (double ci : costs) c += ci;
    breakdown->cost_c = c / static_cast<double>(costs.size());
    breakdown->d_wass = d.item();
    breakdown->l_otr = l;
    breakdown->total_disc = total.item();
    breakdown->total_gen = breakdown->cost_c + weights.beta * breakdown->d_wass + weights.gamma * l +
                           weights.lambda * breakdown->rate_bpp;
  }
  return total;
}

}  // namespace cotpcc
