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


#ifndef COTPCC_MODEL_HPP_
#define COTPCC_MODEL_HPP_

#include <cstdint>
#include <memory>
#include <vector>

#include "cotpcc/bitstream.hpp"
#include "cotpcc/nets.hpp"

namespace cotpcc {

struct ModelConfig {
  NetConfig net;
  QuantizerConfig quantizer;
  // Priors in quantization steps. Coordinates span about +-512 steps.
  FactorizedModel::Init coord_prior{6, 0.0, 400.0, 120.0};
  FactorizedModel::Init feature_prior{6, 0.0, 3.0, 1.0};
  SamplerKind sampler = SamplerKind::kLearned;
  Ratios ratios{0.5, 0.5, 0.5};
};

// Encoder, decoder and entropy models: everything on the minimizing side.
class Generator {
 public:
  Generator(const ModelConfig& config, std::uint64_t seed);
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;

  struct Output {
    Var xhat;           // n x 3
    Var coord_bits;     // 1 x 1
    Var feature_bits;   // 1 x 1
    StageSelection selection;
  };

  // Training pass: latent perturbed by the uniform noise proxy.
  Output forward(const Points& x, std::uint64_t seed, const StageSelection* selection = nullptr) const;
  // Deterministic reconstruction through hard quantization.
  Points reconstruct(const Points& x, std::uint64_t seed = 0) const;

  Bitstream compress(const Points& x, std::uint64_t seed = 0) const;
  Points decompress(const Bitstream& bs) const;

  const ModelConfig& config() const { return config_; }
  const CodecModels& codec() const { return codec_; }
  const Encoder& encoder() const { return *encoder_; }
  const Decoder& decoder() const { return *decoder_; }

  std::vector<nn::ParamStore*> stores() { return {&sampler_store_, &encoder_store_, &decoder_store_, &entropy_store_}; }
  std::vector<const nn::ParamStore*> stores() const {
    return {&sampler_store_, &encoder_store_, &decoder_store_, &entropy_store_};
  }
  std::vector<Var> parameters() const;
  std::uint64_t digest() const;

 private:
  ModelConfig config_;
  nn::ParamStore sampler_store_{"sampler"};
  nn::ParamStore encoder_store_{"encoder"};
  nn::ParamStore decoder_store_{"decoder"};
  nn::ParamStore entropy_store_{"entropy"};
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<Decoder> decoder_;
  CodecModels codec_;
};

// The critic J with its own parameter group.
class Critic {
 public:
  Critic(const NetConfig& config, std::uint64_t seed, bool zero_head = false);
  Critic(const Critic&) = delete;
  Critic& operator=(const Critic&) = delete;

  const Discriminator& net() const { return *net_; }
  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }
  std::vector<Var> parameters() const { return store_.vars(); }
  std::uint64_t digest() const { return store_.digest(); }

 private:
  nn::ParamStore store_{"critic"};
  std::unique_ptr<Discriminator> net_;
};

}  // namespace cotpcc

#endif  // COTPCC_MODEL_HPP_
