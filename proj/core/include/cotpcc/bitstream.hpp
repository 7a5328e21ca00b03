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


#ifndef COTPCC_BITSTREAM_HPP_
#define COTPCC_BITSTREAM_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cotpcc/entropy.hpp"

namespace cotpcc {

inline constexpr std::uint8_t kBitstreamVersion = 1;
inline constexpr std::int32_t kCoordTableWidth = 1536;
inline constexpr std::int32_t kFeatureTableWidth = 4096;

// Probability models used to code one latent.
struct CodecModels {
  FactorizedModel coords;    // 1 channel shared by x, y, z
  FactorizedModel features;  // latent_dim channels
  Var feature_log_scale;     // 1 x latent_dim, applied before quantization
};

// Integer latent: coordinates in coord_step units, features in feature
// units after scaling.
struct QuantizedLatent {
  IntMatrix coords;    // m x 3
  IntMatrix features;  // m x d
};

// Quantization parameters as stored in the stream (single precision).
struct LatentScales {
  float coord_step = 0.0f;
  std::vector<float> feature_scales;  // multiply features before rounding
};

LatentScales latent_scales(const CodecModels& models, const QuantizerConfig& config);
QuantizedLatent quantize_latent(const Matrix& p3, const Matrix& f3, const LatentScales& scales);
// Returns {p3, f3}.
std::pair<Matrix, Matrix> dequantize_latent(const QuantizedLatent& q, const LatentScales& scales);

struct BitstreamHeader {
  std::uint8_t version = kBitstreamVersion;
  std::uint32_t n = 0;  // source point count
  std::uint32_t m = 0;
  std::uint16_t d = 0;
  std::array<float, 3> ratios{};
  LatentScales scales;
  std::uint64_t digest = 0;
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<std::uint8_t> coord_payload;
  std::vector<std::uint8_t> feature_payload;

  std::uint64_t payload_bits() const { return 8 * (coord_payload.size() + feature_payload.size()); }
  std::uint64_t header_bits() const;
};

std::vector<std::uint8_t> serialize(const Bitstream& bs);
Bitstream parse_bitstream(std::span<const std::uint8_t> bytes);
void write_bitstream(const std::filesystem::path& path, const Bitstream& bs);
Bitstream read_bitstream(const std::filesystem::path& path);

// Coding tables derived from the models; identical on both sides.
struct CodingTables {
  CodingTable coords;
  std::vector<CodingTable> features;
};
CodingTables make_coding_tables(const CodecModels& models);

// Header fields other than m, d are taken from `header`.
Bitstream encode_bitstream(const QuantizedLatent& latent, const CodecModels& models, BitstreamHeader header);
// Throws DigestMismatch when the stream was written for other parameters.
QuantizedLatent decode_bitstream(const Bitstream& bs, const CodecModels& models, std::uint64_t digest);

// Sum of -log2 P over all coded symbols under the (floored) models.
double ideal_bits(const QuantizedLatent& latent, const CodecModels& models);

// Payload bits per source point.
double compute_bpp(const Bitstream& bs, std::uint64_t n_source_points);

}  // namespace cotpcc

#endif  // COTPCC_BITSTREAM_HPP_
