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


#ifndef COTPCC_RANGE_CODER_HPP_
#define COTPCC_RANGE_CODER_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cotpcc {

// Byte-oriented range coder over 16-bit cumulative frequency tables
// (total 2^16). The decoder treats bytes past the end of its input as zero,
// so the encoder drops trailing zero bytes.
class RangeEncoder {
 public:
  // Codes the interval [cum, cum + freq) of 65536.
  void encode(std::uint32_t cum, std::uint32_t freq);
  // 16 raw bits.
  void encode_raw16(std::uint32_t value) { encode(value & 0xFFFFu, 1); }
  std::vector<std::uint8_t> finish();

 private:
  void carry();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::vector<std::uint8_t> out_;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> data);

  // Frequency-scaled target in [0, 65536); follow with consume().
  std::uint32_t peek();
  void consume(std::uint32_t cum, std::uint32_t freq);

  // Slot s with cdf[s] <= target < cdf[s + 1]; cdf as in CodingTable.
  std::size_t decode(std::span<const std::uint32_t> cdf);
  std::uint32_t decode_raw16();

  std::size_t position() const { return pos_; }

 private:
  std::uint8_t next() { return pos_ < data_.size() ? data_[pos_++] : (++pos_, std::uint8_t{0}); }
  void normalize();

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;  // offset of the code value above the interval start
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t step_ = 0;
};

}  // namespace cotpcc

#endif  // COTPCC_RANGE_CODER_HPP_
