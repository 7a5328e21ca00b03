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

#ifndef COTPCC_NETS_HPP_
#define COTPCC_NETS_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "cotpcc/cloud.hpp"
#include "cotpcc/nn.hpp"

namespace cotpcc {

using ad::Matrix;
using ad::Var;
using Ratios = std::array<double, 3>;

// Layer widths of every network. Only the 1024-wide significance space is
// fixed by the method; the rest is sized for desk-scale training.
struct NetConfig {
  Index knn = 16;
  Index lift_dim = 32;
  Index transformer_dim = 64;
  std::array<Index, 3> edge_dims{128, 256, 1024};
  Index stage_dim = 64;
  Index latent_dim = 8;
  Index decoder_dim = 64;
  std::array<double, 3> offset_scales{0.25, 0.15, 0.1};  // coarse to fine
  Index max_expansion = 3;  // children per point supported by the decoder
  double refine_scale = 0.05;
  double output_clamp = 1.2;
  Index disc_dim = 64;
  Index disc_blocks = 2;
  double leaky_slope = 0.2;

  Index significance_dim() const { return edge_dims.back(); }
};

enum class SamplerKind { kLearned, kFps };

const char* to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

// ceil(n * r), robust to ratios that went through f32 storage.
Index stage_size(Index n, double ratio);
// Children per point when undoing a stage of ratio r: ceil(1 / r).
Index expansion_factor(double ratio);
// m = ceil(ceil(ceil(n r1) r2) r3).
Index latent_size(Index n, const Ratios& ratios);

// Density-sensitive sampler shared by all encoder stages: a pointwise
// feature lift, one vector-attention point-transformer layer over k-NN
// neighbourhoods, and three EdgeConv layers producing per-point significance
// features.
class Sampler {
 public:
  Sampler(nn::ParamStore& store, const NetConfig& config, Rng& rng);

  // Differentiable trunk (lift + point transformer): n x transformer_dim.
  Var trunk(const Points& points, const std::vector<Index>& knn_table) const;

  // EdgeConv stack on trunk features; forward only, single precision.
  Matrix significance(const Matrix& trunk_features, const std::vector<Index>& knn_table) const;

  // Full sampler feature map of a cloud: n x 1024.
  Matrix features(const Points& points) const;

  const NetConfig& config() const { return config_; }

 private:
  NetConfig config_;
  nn::Linear lift_;
  nn::Linear query_, key_, value_, position_, attention_, residual_;
  std::array<nn::Linear, 3> edge_;
};

// Rows reaching the per-column maximum (S1) and, when S1 is too small, the
// union of per-column top-k rows (S_k) with k = ceil(quota / |S1|) grown
// until the pool reaches the quota. Returns ceil(n r) row indices, ascending,
// drawn with the given seed; S1 is always kept when it fits.
std::vector<Index> significance_select(const Matrix& features, double ratio, std::uint64_t seed);

using StageSelection = std::array<std::vector<Index>, 3>;

struct EncoderOutput {
  Var p3;  // m x 3 (no gradient: gathered input coordinates)
  Var f3;  // m x latent_dim
  std::array<Points, 3> stage_points;
  StageSelection stage_indices;  // into the stage input
  Ratios ratios{};
};

class Encoder {
 public:
  Encoder(nn::ParamStore& sampler_store, nn::ParamStore& encoder_store, const NetConfig& config, Rng& rng);

  // A `selection` from an earlier pass on the same cloud skips the
  // significance computation.
  EncoderOutput forward(const Points& cloud, const Ratios& ratios, SamplerKind kind, std::uint64_t seed,
                        const StageSelection* selection = nullptr) const;

  const Sampler& sampler() const { return sampler_; }

 private:
  NetConfig config_;
  Sampler sampler_;
  std::array<nn::Linear, 3> aggregate_;
  nn::Linear project_;
};

// Three offset-expansion stages mirroring the encoder ratios, a pointwise
// refinement and a trim/pad to the requested point count.
class Decoder {
 public:
  Decoder(nn::ParamStore& store, const NetConfig& config, Rng& rng);

  Var forward(const Var& p3, const Var& f3, const Ratios& ratios, Index n_out) const;

 private:
  NetConfig config_;
  nn::Linear input_;
  std::array<nn::Linear, 3> offset_, child_, offset_embed_;
  nn::Linear refine_;
};

// Critic J: residual pointwise blocks, max+mean pooling, two-layer head, sigmoid score.
class Discriminator {
 public:
  Discriminator(nn::ParamStore& store, const NetConfig& config, Rng& rng, bool zero_head = false);

  // Scalar (1 x 1) score; differentiable in both parameters and `points`.
  Var forward(const Var& points) const;
  double score(const Points& points) const;

 private:
  NetConfig config_;
  nn::Linear input_;
  std::vector<std::pair<nn::Linear, nn::Linear>> blocks_;
  nn::Linear head_hidden_, head_out_;
};

}  // namespace cotpcc

#endif  // COTPCC_NETS_HPP_
