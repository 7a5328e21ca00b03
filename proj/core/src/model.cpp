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


#include "cotpcc/model.hpp"

#include <cmath>

#include "cotpcc/errors.hpp"

namespace cotpcc {

Generator::Generator(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.quantizer.validate();
  Rng rng(derive_seed(seed, 0x9e3u));
  encoder_ = std::make_unique<Encoder>(sampler_store_, encoder_store_, config_.net, rng);
  decoder_ = std::make_unique<Decoder>(decoder_store_, config_.net, rng);
  codec_.coords = FactorizedModel(entropy_store_, "coords", 1, config_.coord_prior);
  codec_.features = FactorizedModel(entropy_store_, "features", config_.net.latent_dim, config_.feature_prior);
  codec_.feature_log_scale = entropy_store_.add("feature_log_scale", Matrix::Zero(1, config_.net.latent_dim));
}

std::vector<Var> Generator::parameters() const {
  std::vector<Var> out;
  for (const auto* store : stores()) {
    const auto v = store->vars();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::uint64_t Generator::digest() const {
  Digest d;
  for (const auto* store : stores()) d.update_value(store->digest());
  return d.value();
}

Generator::Output Generator::forward(const Points& x, std::uint64_t seed, const StageSelection* selection) const {
  const EncoderOutput enc = encoder_->forward(x, config_.ratios, config_.sampler, seed, selection);
  const double step = config_.quantizer.coord_step;
  const Var p3_tilde = noise_proxy(enc.p3, step, derive_seed(seed, 101));
  // Features in quantizer units: f * exp(log_scale) / feature_step.
  const Var scale = ad::scale(ad::exp(codec_.feature_log_scale), 1.0 / config_.quantizer.feature_step);
  const Var z_tilde = noise_proxy(ad::mul_row(enc.f3, scale), 1.0, derive_seed(seed, 102));
  const Var f3_tilde = ad::mul_row(z_tilde, ad::reciprocal(scale));

  Output out;
  out.coord_bits = rate_estimate(ad::reshape(p3_tilde, p3_tilde.rows() * 3, 1), codec_.coords, step);
  out.feature_bits = rate_estimate(z_tilde, codec_.features, 1.0);
  out.xhat = decoder_->forward(p3_tilde, f3_tilde, config_.ratios, x.rows());
  out.selection = enc.stage_indices;
  return out;
}

Bitstream Generator::compress(const Points& x, std::uint64_t seed) const {
  ad::NoGradGuard guard;
  if (x.rows() < 1 || !x.allFinite()) throw InvalidArgument("compress: empty or non-finite cloud");
  const EncoderOutput enc = encoder_->forward(x, config_.ratios, config_.sampler, seed);
  BitstreamHeader header;
  header.n = static_cast<std::uint32_t>(x.rows());
  for (std::size_t s = 0; s < 3; ++s) header.ratios[s] = static_cast<float>(config_.ratios[s]);
  header.scales = latent_scales(codec_, config_.quantizer);
  header.digest = digest();
  const QuantizedLatent q = quantize_latent(enc.p3.value(), enc.f3.value(), header.scales);
  return encode_bitstream(q, codec_, std::move(header));
}

Points Generator::decompress(const Bitstream& bs) const {
  ad::NoGradGuard guard;
  const QuantizedLatent q = decode_bitstream(bs, codec_, digest());
  const auto [p3, f3] = dequantize_latent(q, bs.header.scales);
  Ratios ratios{};
  for (std::size_t s = 0; s < 3; ++s) ratios[s] = static_cast<double>(bs.header.ratios[s]);
  if (stage_size(stage_size(stage_size(bs.header.n, ratios[0]), ratios[1]), ratios[2]) !=
      static_cast<Index>(bs.header.m)) {
    throw DataError("bitstream header: m inconsistent with n and ratios");
  }
  const Var xhat = decoder_->forward(ad::constant(p3), ad::constant(f3), ratios, bs.header.n);
  return xhat.value();
}

Points Generator::reconstruct(const Points& x, std::uint64_t seed) const { return decompress(compress(x, seed)); }

Critic::Critic(const NetConfig& config, std::uint64_t seed, bool zero_head) {
  Rng rng(derive_seed(seed, 0xc41u));
  net_ = std::make_unique<Discriminator>(store_, config, rng, zero_head);
}

}  // namespace cotpcc
