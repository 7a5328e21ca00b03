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


#include "cotpcc/bitstream.hpp"

#include <cmath>
#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cotpcc/errors.hpp"
#include "cotpcc/range_coder.hpp"

namespace cotpcc {
namespace {

constexpr char kMagic[4] = {'C', 'O', 'T', 'P'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    bytes.insert(bytes.end(), raw, raw + sizeof(T));
  }
  void put_bytes(std::span<const std::uint8_t> b) { bytes.insert(bytes.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }
  std::vector<std::uint8_t> get_bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError("truncated stream at byte offset " + std::to_string(bytes_.size()) + " (need " +
                      std::to_string(pos_ + n) + " bytes)");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t zigzag(std::int32_t v) {
  return (static_cast<std::uint32_t>(v) << 1) ^ static_cast<std::uint32_t>(v >> 31);
}
std::int32_t unzigzag(std::uint32_t u) {
  return static_cast<std::int32_t>(u >> 1) ^ -static_cast<std::int32_t>(u & 1u);
}

void encode_symbol(RangeEncoder& enc, const CodingTable& table, std::int32_t v) {
  if (v >= table.lo && v <= table.hi) {
    const auto slot = static_cast<std::size_t>(v - table.lo);
    enc.encode(table.cdf[slot], table.cdf[slot + 1] - table.cdf[slot]);
    return;
  }
  const auto esc = static_cast<std::size_t>(table.escape_slot());
  enc.encode(table.cdf[esc], table.cdf[esc + 1] - table.cdf[esc]);
  const std::uint32_t u = zigzag(v);
  enc.encode_raw16(u >> 16);
  enc.encode_raw16(u & 0xFFFFu);
}

std::int32_t decode_symbol(RangeDecoder& dec, const CodingTable& table) {
  const std::size_t slot = dec.decode(table.cdf);
  if (static_cast<Index>(slot) != table.escape_slot()) return table.lo + static_cast<std::int32_t>(slot);
  const std::uint32_t high = dec.decode_raw16();
  const std::uint32_t low = dec.decode_raw16();
  return unzigzag((high << 16) | low);
}

CodingTable table_for(const FactorizedModel& model, Index channel, std::int32_t width) {
  const auto [lo, hi] = model.support(channel, width);
  return build_coding_table(model, channel, lo, hi);
}

}  // namespace

LatentScales latent_scales(const CodecModels& models, const QuantizerConfig& config) {
  config.validate();
  LatentScales s;
  s.coord_step = static_cast<float>(config.coord_step);
  const Matrix& ls = models.feature_log_scale.value();
  for (Index c = 0; c < ls.cols(); ++c) {
    s.feature_scales.push_back(static_cast<float>(std::exp(ls(0, c)) / config.feature_step));
  }
  return s;
}

QuantizedLatent quantize_latent(const Matrix& p3, const Matrix& f3, const LatentScales& scales) {
  if (p3.cols() != 3 || f3.rows() != p3.rows() ||
      f3.cols() != static_cast<Index>(scales.feature_scales.size())) {
    throw InvalidArgument("quantize_latent: shape mismatch");
  }
  QuantizedLatent q;
  q.coords = quantize(p3, scales.coord_step);
  Matrix scaled = f3;
  for (Index c = 0; c < f3.cols(); ++c) scaled.col(c) *= static_cast<double>(scales.feature_scales[c]);
  q.features = quantize(scaled, 1.0);
  return q;
}

std::pair<Matrix, Matrix> dequantize_latent(const QuantizedLatent& q, const LatentScales& scales) {
  Matrix p3 = dequantize(q.coords, scales.coord_step);
  Matrix f3 = q.features.cast<double>();
  for (Index c = 0; c < f3.cols(); ++c) f3.col(c) /= static_cast<double>(scales.feature_scales[c]);
  return {std::move(p3), std::move(f3)};
}

std::uint64_t Bitstream::header_bits() const { return 8 * serialize(*this).size() - payload_bits(); }

std::vector<std::uint8_t> serialize(const Bitstream& bs) {
  const BitstreamHeader& h = bs.header;
  if (h.scales.feature_scales.size() != h.d) throw InvalidArgument("bitstream: feature scale count != d");
  Writer w;
  w.put_bytes({reinterpret_cast<const std::uint8_t*>(kMagic), 4});
  w.put(h.version);
  w.put(h.n);
  w.put(h.m);
  w.put(h.d);
  for (float r : h.ratios) w.put(r);
  w.put(h.scales.coord_step);
  for (float s : h.scales.feature_scales) w.put(s);
  w.put(h.digest);
  w.put(static_cast<std::uint32_t>(bs.coord_payload.size()));
  w.put_bytes(bs.coord_payload);
  w.put(static_cast<std::uint32_t>(bs.feature_payload.size()));
  w.put_bytes(bs.feature_payload);
  return std::move(w.bytes);
}

Bitstream parse_bitstream(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.get_bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw DataError("not a cotp bitstream (bad magic)");
  Bitstream bs;
  BitstreamHeader& h = bs.header;
  h.version = r.get<std::uint8_t>();
  if (h.version != kBitstreamVersion) {
    throw DataError("unsupported bitstream version " + std::to_string(h.version));
  }
  h.n = r.get<std::uint32_t>();
  h.m = r.get<std::uint32_t>();
  h.d = r.get<std::uint16_t>();
  for (float& ratio : h.ratios) ratio = r.get<float>();
  h.scales.coord_step = r.get<float>();
  if (!(h.scales.coord_step > 0.0f) || !std::isfinite(h.scales.coord_step)) {
    throw DataError("bitstream: invalid coord_step at byte offset " + std::to_string(r.position() - 4));
  }
  for (std::uint16_t c = 0; c < h.d; ++c) {
    const float s = r.get<float>();
    if (!(s > 0.0f) || !std::isfinite(s)) {
      throw DataError("bitstream: invalid feature scale at byte offset " + std::to_string(r.position() - 4));
    }
    h.scales.feature_scales.push_back(s);
  }
  h.digest = r.get<std::uint64_t>();
  bs.coord_payload = r.get_bytes(r.get<std::uint32_t>());
  bs.feature_payload = r.get_bytes(r.get<std::uint32_t>());
  if (r.remaining() != 0) {
    throw DataError("trailing bytes after bitstream at byte offset " + std::to_string(r.position()));
  }
  return bs;
}

void write_bitstream(const std::filesystem::path& path, const Bitstream& bs) {
  const auto bytes = serialize(bs);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

Bitstream read_bitstream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_bitstream(bytes);
}

CodingTables make_coding_tables(const CodecModels& models) {
  CodingTables t;
  t.coords = table_for(models.coords, 0, kCoordTableWidth);
  for (Index c = 0; c < models.features.channels(); ++c) {
    t.features.push_back(table_for(models.features, c, kFeatureTableWidth));
  }
  return t;
}

Bitstream encode_bitstream(const QuantizedLatent& latent, const CodecModels& models, BitstreamHeader header) {
  const Index m = latent.coords.rows();
  const Index d = latent.features.cols();
  if (latent.coords.cols() != 3 || latent.features.rows() != m || d != models.features.channels()) {
    throw InvalidArgument("encode_bitstream: latent does not match the models");
  }
  header.m = static_cast<std::uint32_t>(m);
  header.d = static_cast<std::uint16_t>(d);
  const CodingTables tables = make_coding_tables(models);

  Bitstream bs;
  bs.header = std::move(header);
  RangeEncoder coords;
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < 3; ++j) encode_symbol(coords, tables.coords, latent.coords(i, j));
  }
  bs.coord_payload = coords.finish();
  RangeEncoder features;
  for (Index i = 0; i < m; ++i) {
    for (Index c = 0; c < d; ++c) {
      encode_symbol(features, tables.features[static_cast<std::size_t>(c)], latent.features(i, c));
    }
  }
  bs.feature_payload = features.finish();
  return bs;
}

QuantizedLatent decode_bitstream(const Bitstream& bs, const CodecModels& models, std::uint64_t digest) {
  const BitstreamHeader& h = bs.header;
  if (h.digest != digest) {
    throw DigestMismatch("bitstream digest " + std::to_string(h.digest) + " does not match model digest " +
                         std::to_string(digest));
  }
  if (static_cast<Index>(h.d) != models.features.channels()) {
    throw DataError("bitstream has " + std::to_string(h.d) + " feature channels, model has " +
                    std::to_string(models.features.channels()));
  }
  const auto m = static_cast<Index>(h.m);
  const CodingTables tables = make_coding_tables(models);
  QuantizedLatent q;
  q.coords.resize(m, 3);
  q.features.resize(m, h.d);
  RangeDecoder coords(bs.coord_payload);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < 3; ++j) q.coords(i, j) = decode_symbol(coords, tables.coords);
  }
  RangeDecoder features(bs.feature_payload);
  for (Index i = 0; i < m; ++i) {
    for (Index c = 0; c < h.d; ++c) {
      q.features(i, c) = decode_symbol(features, tables.features[static_cast<std::size_t>(c)]);
    }
  }
  return q;
}

double ideal_bits(const QuantizedLatent& latent, const CodecModels& models) {
  ad::NoGradGuard guard;
  const Matrix coords = latent.coords.cast<double>();
  const Matrix flat = Eigen::Map<const Matrix>(coords.data(), coords.size(), 1);
  return models.coords.bits(ad::constant(flat)).value().sum() +
         models.features.bits(ad::constant(latent.features.cast<double>())).value().sum();
}

double compute_bpp(const Bitstream& bs, std::uint64_t n_source_points) {
  if (n_source_points == 0) throw InvalidArgument("compute_bpp: zero source points");
  return static_cast<double>(bs.payload_bits()) / static_cast<double>(n_source_points);
}

}  // namespace cotpcc
