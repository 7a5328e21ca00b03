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

#ifndef COTPCC_METRICS_HPP_
#define COTPCC_METRICS_HPP_

#include <cstdint>
#include <vector>

#include "cotpcc/cloud.hpp"

namespace cotpcc {

inline constexpr double kPsnrCapDb = 100.0;
inline constexpr Index kDefaultNormalK = 16;

struct MetricReport {
  double cd = 0.0;
  double psnr_db = 0.0;
  double bpp = 0.0;
  Index n_source_points = 0;
  std::uint64_t payload_bits = 0;
  std::uint64_t header_bits = 0;
};

// Symmetric L2 Chamfer distance: sum of the two directed mean squared
// nearest-neighbour distances.
double chamfer_l2(const Points& a, const Points& b);
inline double chamfer_l2(const PointCloud& a, const PointCloud& b) { return chamfer_l2(a.points, b.points); }

struct NormalEstimate {
  Points normals;
  // 1 where the neighbourhood covariance had rank < 2 and the normal fell
  // back to +z.
  std::vector<std::uint8_t> degenerate;
};

// PCA normals from the k nearest neighbours (the point itself included).
NormalEstimate estimate_normals(const Points& points, Index k = kDefaultNormalK);

// Symmetric point-to-plane PSNR using reference normals; the peak is the
// reference bounding-box diagonal and the result is capped at 100 dB.
double psnr_point_to_plane(const Points& ref, const Points& rec, Index k = kDefaultNormalK);

double bpp_from_bits(std::uint64_t payload_bits, Index n_source_points);

}  // namespace cotpcc

#endif  // COTPCC_METRICS_HPP_
