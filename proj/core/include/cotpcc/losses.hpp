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


#ifndef COTPCC_LOSSES_HPP_
#define COTPCC_LOSSES_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cotpcc/model.hpp"

namespace cotpcc {

struct LossWeights {
  double beta = 100.0;
  double gamma = 0.001;
  double lambda = 0.0;

  void validate() const;
};

// One evaluation of all objective terms. rate_bpp is bits per source point.
struct LossBreakdown {
  double cost_c = 0.0;
  double d_wass = 0.0;
  double l_otr = 0.0;
  double rate_bpp = 0.0;
  double total_gen = 0.0;
  double total_disc = 0.0;

  bool finite() const;
};

// Symmetric L2 Chamfer distance with nearest-neighbour assignments held
// fixed; differentiable in both point sets.
Var chamfer_var(const Var& a, const Var& b);

// Mean Chamfer distance over matched pairs.
Var cost_c(std::span<const Var> x, std::span<const Var> xhat);

// Mean over pairs of (J(x_i) - J(xhat_i))^2; each entry is a 1 x 1 score.
Var wasserstein_quadratic(std::span<const Var> jx, std::span<const Var> jxhat);

// Mean over the batch of (||grad_x J(x_i)||_F - cost_i)^2 with the costs
// held constant. With create_graph the result is differentiable in the
// critic parameters.
Var ot_regularizer(std::span<const Points> x, std::span<const double> costs, const Discriminator& critic,
                   bool create_graph = true);

// Same, for any scalar map of an N x 3 cloud.
using CriticFn = std::function<Var(const Var&)>;
Var ot_regularizer(std::span<const Points> x, std::span<const double> costs, const CriticFn& critic,
                   bool create_graph = true);

// c + beta d_wass + gamma L_OTR.
Var ot_loss(std::span<const Points> x, std::span<const Var> xhat, const Discriminator& critic,
            const LossWeights& weights, LossBreakdown* breakdown = nullptr);

// L_OT + lambda * bits per point, with xhat produced by the generator's
// noise-proxied forward pass (sample i uses derive_seed(seed, i)). The
// regularizer enters as a value only.
Var generator_objective(std::span<const Points> x, const Generator& generator, const Discriminator& critic,
                        const LossWeights& weights, std::uint64_t seed, LossBreakdown* breakdown = nullptr);

// beta d_wass - gamma L_OTR on fixed reconstructions; the critic ascends it.
Var discriminator_objective(std::span<const Points> x, std::span<const Points> xhat, const Discriminator& critic,
                            const LossWeights& weights, LossBreakdown* breakdown = nullptr);

}  // namespace cotpcc

#endif  // COTPCC_LOSSES_HPP_
