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


#ifndef COTPCC_RD_HPP_
#define COTPCC_RD_HPP_

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace cotpcc {

inline constexpr const char* kRdCsvHeader = "model,lambda,bpp,cd_e3,psnr_db";
inline constexpr const char* kRdCsvVersionLine = "#cotpcc-rd-csv 1";

struct RDRecord {
  std::string model;
  double lambda = 0.0;
  double bpp = 0.0;
  double cd_e3 = 0.0;  // Chamfer distance x 1e3
  double psnr_db = 0.0;

  bool operator==(const RDRecord&) const = default;
};

void write_rd_csv(std::ostream& out, std::span<const RDRecord> records);
void write_rd_csv(const std::filesystem::path& path, std::span<const RDRecord> records);
// Accepts the version comment line, columns in any order; rejects unknown or
// missing columns and non-finite values.
std::vector<RDRecord> read_rd_csv(std::istream& in);
std::vector<RDRecord> read_rd_csv(const std::filesystem::path& path);

struct RDCurve {
  std::string model;
  std::vector<RDRecord> points;  // ascending bpp
};

// Groups by model (first-appearance order) and sorts each curve by bpp.
// Throws on duplicate (model, lambda) rows or curves with fewer than 2 points.
std::vector<RDCurve> rd_curves(std::span<const RDRecord> records);

// SVG with two panels: CD x 1e3 vs Bpp and PSNR vs Bpp, one polyline per model.
std::string render_rd_svg(std::span<const RDCurve> curves);
void write_rd_plot(const std::filesystem::path& path, std::span<const RDRecord> records);

}  // namespace cotpcc

#endif  // COTPCC_RD_HPP_
