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

#ifndef COTPCC_NN_HPP_
#define COTPCC_NN_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cotpcc/autodiff.hpp"
#include "cotpcc/random.hpp"

namespace cotpcc::nn {

using ad::Matrix;
using ad::Var;
using ad::Index;

// Named trainable leaves of one parameter group.
class ParamStore {
 public:
  explicit ParamStore(std::string group = {}) : group_(std::move(group)) {}

  Var add(const std::string& name, Matrix init);

  const std::string& group() const { return group_; }
  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::vector<Var> vars() const;
  Var find(const std::string& name) const;
  Index scalar_count() const;
  std::uint64_t digest() const;
  // Copies values from a store with identical names and shapes.
  void assign(const ParamStore& other);

 private:
  std::string group_;
  std::vector<std::pair<std::string, Var>> entries_;
};

// y = x W + b, W: in x out.
struct Linear {
  Var weight;
  Var bias;

  Var operator()(const Var& x) const { return ad::add_row(ad::matmul(x, weight), bias); }
  Index in_features() const { return weight.rows(); }
  Index out_features() const { return weight.cols(); }

  // Uniform(+-gain/sqrt(in)) weights, zero bias.
  static Linear create(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng,
                       double gain = 1.0);
};

// Adam with bias correction. One instance per parameter owner.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void step(const std::vector<Var>& params, const std::vector<Var>& grads);

  std::int64_t steps_taken() const { return t_; }
  double learning_rate() const { return lr_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  void set_steps_taken(std::int64_t t) { t_ = t; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

std::uint64_t digest_of(const std::vector<Var>& vars);

}  // namespace cotpcc::nn

#endif  // COTPCC_NN_HPP_
