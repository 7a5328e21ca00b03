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


#include "cotpcc/range_coder.hpp"

#include <algorithm>

#include "cotpcc/errors.hpp"

namespace cotpcc {
namespace {
constexpr std::uint32_t kTop = 1u << 24;
constexpr std::uint64_t kWindow = std::uint64_t{1} << 32;
}  // namespace

void RangeEncoder::carry() {
  for (auto it = out_.rbegin(); it != out_.rend(); ++it) {
    if (++*it != 0) return;
  }
}

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq) {
  if (finished_) throw Error("range encoder already finished");
  if (freq == 0 || cum + freq > 65536u) throw InvalidArgument("range encoder: bad interval");
  const std::uint32_t r = range_ >> 16;
  low_ += static_cast<std::uint64_t>(r) * cum;
  range_ = r * freq;
  if (low_ >= kWindow) {
    carry();
    low_ -= kWindow;
  }
  while (range_ < kTop) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
    low_ = (low_ << 8) & (kWindow - 1);
    range_ <<= 8;
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (finished_) throw Error("range encoder already finished");
  finished_ = true;
  // Shortest byte string whose zero extension lands inside [low, low + range).
  const std::uint64_t high = low_ + range_;
  for (int bytes = 0; bytes <= 4; ++bytes) {
    const std::uint64_t mask = (std::uint64_t{1} << (32 - 8 * bytes)) - 1;
    const std::uint64_t value = (low_ + mask) & ~mask;
    if (value >= high) continue;
    std::uint64_t v = value;
    if (v >= kWindow) {
      carry();
      v -= kWindow;
    }
    for (int b = 0; b < bytes; ++b) out_.push_back(static_cast<std::uint8_t>(v >> (24 - 8 * b)));
    break;
  }
  while (!out_.empty() && out_.back() == 0) out_.pop_back();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> data) : data_(data) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next();
}

void RangeDecoder::normalize() {
  while (range_ < kTop) {
    code_ = (code_ << 8) | next();
    range_ <<= 8;
  }
}

std::uint32_t RangeDecoder::peek() {
  step_ = range_ >> 16;
  const std::uint32_t target = code_ / step_;
  if (target >= 65536u) throw DataError("corrupt range-coded stream at byte offset " + std::to_string(pos_));
  return target;
}

void RangeDecoder::consume(std::uint32_t cum, std::uint32_t freq) {
  code_ -= step_ * cum;
  range_ = step_ * freq;
  normalize();
}

std::size_t RangeDecoder::decode(std::span<const std::uint32_t> cdf) {
  const std::uint32_t target = peek();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  const auto slot = static_cast<std::size_t>(it - cdf.begin()) - 1;
  consume(cdf[slot], cdf[slot + 1] - cdf[slot]);
  return slot;
}

std::uint32_t RangeDecoder::decode_raw16() {
  const std::uint32_t value = peek();
  consume(value, 1);
  return value;
}

}  // namespace cotpcc
