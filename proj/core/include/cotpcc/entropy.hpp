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

#ifndef COTPCC_ENTROPY_HPP_
#define COTPCC_ENTROPY_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cotpcc/nn.hpp"

namespace cotpcc {

using ad::Matrix;
using ad::Var;
using ad::Index;
using IntMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Smallest probability any integer bin may take.
inline constexpr double kProbabilityFloor = 1.0 / 65536.0;
inline constexpr int kCoderPrecision = 16;

struct QuantizerConfig {
  double coord_step = 2.0 / 1024.0;
  double feature_step = 1.0;

  void validate() const;
};

// round(value / step), ties to even.
IntMatrix quantize(const Matrix& values, double step);
Matrix dequantize(const IntMatrix& q, double step);

// values + U(-step/2, step/2), drawn from `seed`. The noise is a constant, so
// gradients pass straight through to `values`.
Var noise_proxy(const Var& values, double step, std::uint64_t seed);

// Per-channel learned distribution over integer bins. Each channel's
// cumulative function is a mixture of logistics, monotone by construction;
// bin q has mass CDF(q + 1/2) - CDF(q - 1/2), floored at 2^-16.
class FactorizedModel {
 public:
  struct Init {
    Index components = 6;
    double center = 0.0;
    double spread = 3.0;  // component means span center +- spread
    double scale = 1.0;   // initial component scale
  };

  FactorizedModel() = default;
  FactorizedModel(nn::ParamStore& store, const std::string& name, Index channels, const Init& init);

  Index channels() const { return means_.rows(); }
  Index components() const { return means_.cols(); }

  // Bits per element, -log2 max(P(bin), floor), for y (rows x channels)
  // measured in quantization steps. Differentiable in y and parameters.
  Var bits(const Var& y) const;

  // Floored bin probability of integer q in channel c.
  double probability(Index channel, double q) const;
  // Continuous CDF of channel c.
  double cdf(Index channel, double x) const;
  // Integer range [lo, hi] outside of which the mass is negligible.
  std::pair<std::int32_t, std::int32_t> support(Index channel, std::int32_t max_width) const;

  std::vector<Var> parameters() const { return {means_, log_scales_, logits_}; }

 private:
  Var means_;       // channels x K
  Var log_scales_;  // channels x K
  Var logits_;      // channels x K
};

// Total bits of z under `model`, with bins of width `step`:
// sum -log2 P(bin(z / step)). z must have model.channels() columns.
Var rate_estimate(const Var& z, const FactorizedModel& model, double step);

// Trains a standalone model on fixed data (rows x channels, in step units)
// with the noise proxy and Adam; returns the final mean bits per symbol on
// the rounded data.
double fit_factorized_model(FactorizedModel& model, const std::vector<Var>& params, const Matrix& data,
                            int steps, double learning_rate, std::uint64_t seed);

// 16-bit fixed-point cumulative frequency table for one channel. Symbols
// lo..hi map to slots 0..hi-lo; the last slot is an escape symbol for
// out-of-range values. Every slot has frequency >= 1 and the total is 2^16.
struct CodingTable {
  std::int32_t lo = 0;
  std::int32_t hi = 0;
  std::vector<std::uint32_t> cdf;  // size slots + 1, cdf.front() == 0, cdf.back() == 65536

  Index slots() const { return static_cast<Index>(cdf.size()) - 1; }
  Index escape_slot() const { return slots() - 1; }
  double slot_probability(Index slot) const {
    return static_cast<double>(cdf[static_cast<std::size_t>(slot + 1)] - cdf[static_cast<std::size_t>(slot)]) /
           65536.0;
  }
};

CodingTable build_coding_table(const FactorizedModel& model, Index channel, std::int32_t lo, std::int32_t hi);

}  // namespace cotpcc

#endif  // COTPCC_ENTROPY_HPP_
