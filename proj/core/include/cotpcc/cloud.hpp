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

#ifndef COTPCC_CLOUD_HPP_
#define COTPCC_CLOUD_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cotpcc {

using Index = Eigen::Index;
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Vec3 = Eigen::Vector3d;

// An ordered set of 3-D points. Row i is point i.
struct PointCloud {
  Points points;
  std::string source_id;

  PointCloud() = default;
  explicit PointCloud(Points pts, std::string id = {}) : points(std::move(pts)), source_id(std::move(id)) {}

  Index size() const { return points.rows(); }
  bool empty() const { return points.rows() == 0; }

  // Throws InvalidArgument unless non-empty with finite coordinates.
  void validate() const;
};

// A cloud mapped into [-1, 1]^3 together with the affine map back to the
// (cube-scaled) scene frame: scene = normalized / scale + center.
struct Block {
  PointCloud cloud;
  Vec3 origin = Vec3::Zero();
  double edge_length = 0.0;
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Points denormalize() const;
};

enum class CloudFormat { kXyz, kPlyAscii, kPlyBinary };

PointCloud load_cloud(const std::filesystem::path& path);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format);
// Picks the format from the extension: .ply -> binary PLY, otherwise xyz.
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);

// Translates the scene's bounding-box minimum to the origin and scales it
// uniformly so its largest extent equals cube_edge.
Points scale_to_cube(const PointCloud& scene, double cube_edge);

// Splits a scene into occupied, non-overlapping axis-aligned blocks on a grid
// anchored at the cube origin. Blocks are returned in lexicographic grid order.
std::vector<Block> partition_blocks(const PointCloud& scene, double cube_edge, double block_edge);

// Affine map of a cloud into [-1, 1]^3 (bounding-box centered, uniform scale).
PointCloud normalize_to_unit_cube(const PointCloud& cloud);

enum class ShapeFamily { kSphere, kBox, kTorus, kRidgedPlane };

std::string to_string(ShapeFamily family);
ShapeFamily shape_family_from_string(const std::string& name);

struct DatasetSpec {
  enum class Source { kFiles, kSynthetic };
  Source source = Source::kSynthetic;
  double block_edge = 12.0;
  double cube_edge = 100.0;
  Index points_per_block = 1024;
  double nonuniformity = 0.5;
  std::uint64_t seed = 0;
  // Synthetic source.
  std::vector<ShapeFamily> families{ShapeFamily::kSphere, ShapeFamily::kBox, ShapeFamily::kTorus};
  Index clouds_per_family = 64;
  // File source.
  std::vector<std::filesystem::path> files;

  void validate() const;
};

// Raw surface samples of a family before any normalization (unit sphere,
// boxes with random aspect, tori, ridged planes), randomly rotated.
Points sample_surface(ShapeFamily family, Index count, std::uint64_t seed);

// Synthetic clouds (families x clouds_per_family), each non-uniformly
// resampled to points_per_block points and normalized to [-1, 1]^3.
std::vector<PointCloud> synth_dataset(const DatasetSpec& spec);

// Block-partitions every file scene and resamples each occupied block with at
// least points_per_block points down to exactly points_per_block.
std::vector<PointCloud> blocks_from_files(const DatasetSpec& spec);

// Draws n points without replacement; point x is weighted by
// 1 - strength + strength * w(x), where w is a linear ramp along a seeded
// random axis rescaled to [0, 1]. Output keeps input order.
PointCloud nonuniform_sample(const PointCloud& cloud, Index n, double strength, std::uint64_t seed);
std::vector<Index> nonuniform_sample_indices(const PointCloud& cloud, Index n, double strength,
                                             std::uint64_t seed);

// Greedy farthest point sampling. Ties go to the lowest index.
std::vector<Index> fps(const Points& points, Index m, Index start_index = 0);

}  // namespace cotpcc

#endif  // COTPCC_CLOUD_HPP_
