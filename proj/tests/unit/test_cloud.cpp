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


#include <doctest.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

#include "../support/support.hpp"
#include "cotpcc/cloud.hpp"
#include "cotpcc/errors.hpp"

using namespace cotpcc;
using cotpcc::testing::random_points;
using cotpcc::testing::scratch_dir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

std::multiset<std::array<double, 3>> as_set(const Points& p) {
  std::multiset<std::array<double, 3>> s;
  for (Index i = 0; i < p.rows(); ++i) s.insert({p(i, 0), p(i, 1), p(i, 2)});
  return s;
}

}  // namespace

TEST_CASE("xyz parse keeps file order") {
  const auto dir = scratch_dir("xyz");
  write_text(dir / "a.xyz", "0 0 0\n1 0 0\n0 1 0\n");
  const PointCloud c = load_cloud(dir / "a.xyz");
  REQUIRE(c.size() == 3);
  CHECK(c.points(1, 0) == 1.0);
  CHECK(c.points(2, 1) == 1.0);
  CHECK(c.points.row(0).isZero());
}

TEST_CASE("xyz with nan names the line") {
  const auto dir = scratch_dir("xyz_nan");
  write_text(dir / "a.xyz", "0 0 0\n1 nan 0\n");
  try {
    load_cloud(dir / "a.xyz");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("ply with a missing row reports truncated payload") {
  const auto dir = scratch_dir("ply_trunc");
  std::string s = "ply\nformat ascii 1.0\nelement vertex 100\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (int i = 0; i < 99; ++i) s += "0 0 0\n";
  write_text(dir / "a.ply", s);
  CHECK_THROWS_WITH_AS(load_cloud(dir / "a.ply"), doctest::Contains("truncated payload"), ParseError);

  // Binary variant.
  Points p = random_points(100, 3);
  write_cloud(dir / "b.ply", PointCloud(p), CloudFormat::kPlyBinary);
  const auto size = std::filesystem::file_size(dir / "b.ply");
  std::filesystem::resize_file(dir / "b.ply", size - 12);
  CHECK_THROWS_WITH_AS(load_cloud(dir / "b.ply"), doctest::Contains("truncated payload"), ParseError);
}

TEST_CASE("write then load round trips") {
  const auto dir = scratch_dir("roundtrip");
  // Binary PLY stores float32, so start from float-representable values.
  Points p = random_points(257, 11).cast<float>().cast<double>();
  write_cloud(dir / "a.ply", PointCloud(p), CloudFormat::kPlyBinary);
  CHECK(load_cloud(dir / "a.ply").points == p);

  Points q = random_points(64, 12);
  write_cloud(dir / "a.xyz", PointCloud(q), CloudFormat::kXyz);
  CHECK((load_cloud(dir / "a.xyz").points - q).cwiseAbs().maxCoeff() <= 1e-6);
  write_cloud(dir / "b.ply", PointCloud(q), CloudFormat::kPlyAscii);
  CHECK((load_cloud(dir / "b.ply").points - q).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("partition: opposite corners land in two blocks") {
  Points p(2, 3);
  p << 0, 0, 0, 10, 10, 10;
  const auto blocks = partition_blocks(PointCloud(p), 100.0, 50.0);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].cloud.size() == 1);
  CHECK(blocks[1].cloud.size() == 1);
}

TEST_CASE("partition: a cluster stays in one block") {
  // The scene is scaled so its largest extent fills the cube; one far point
  // pins the scale, the cluster lands in a single block.
  Points scene = random_points(51, 6, 0.0, 5.0);
  scene.row(50) << 100.0, 100.0, 100.0;
  const auto blocks = partition_blocks(PointCloud(scene), 100.0, 12.0);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].cloud.size() == 50);
  const Points scaled = scale_to_cube(PointCloud(scene), 100.0);
  CHECK((blocks[0].denormalize() - scaled.topRows(50)).cwiseAbs().maxCoeff() <= 1e-9 * 100.0);
  CHECK(blocks[0].cloud.points.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
}

TEST_CASE("partition: uniform scene counts and tiling") {
  const Points scene = random_points(10000, 5, 0.0, 100.0);
  const auto blocks = partition_blocks(PointCloud(scene), 100.0, 12.0);
  Index total = 0;
  std::set<std::array<double, 3>> origins;
  Points merged(10000, 3);
  for (const auto& b : blocks) {
    merged.middleRows(total, b.cloud.size()) = b.denormalize();
    total += b.cloud.size();
    CHECK(b.cloud.points.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    origins.insert({b.origin[0], b.origin[1], b.origin[2]});
    // Each block's points lie inside its own cell.
    const Points d = b.denormalize();
    for (Index i = 0; i < d.rows(); ++i) {
      for (int a = 0; a < 3; ++a) {
        CHECK(d(i, a) >= b.origin[a] - 1e-9);
        CHECK(d(i, a) <= b.origin[a] + b.edge_length + 1e-9);
      }
    }
  }
  CHECK(total == 10000);
  CHECK(origins.size() == blocks.size());
  // Merge reproduces the scaled scene as a multiset (1e-9 tolerance).
  const Points scaled = scale_to_cube(PointCloud(scene), 100.0);
  auto a = as_set(merged), s = as_set(scaled);
  REQUIRE(a.size() == s.size());
  double worst = 0.0;
  for (auto ia = a.begin(), is = s.begin(); ia != a.end(); ++ia, ++is) {
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs((*ia)[k] - (*is)[k]));
  }
  CHECK(worst <= 1e-9 * 100.0);
}

TEST_CASE("partition rejects degenerate scenes") {
  Points p(3, 3);
  p.setConstant(2.0);
  CHECK_THROWS_AS(partition_blocks(PointCloud(p), 100.0, 12.0), InvalidArgument);
  CHECK_THROWS_AS(partition_blocks(PointCloud(random_points(10, 1)), 10.0, 12.0), InvalidArgument);
}

TEST_CASE("sphere surface samples sit on the unit sphere") {
  const Points p = sample_surface(ShapeFamily::kSphere, 1024, 3);
  for (Index i = 0; i < p.rows(); ++i) CHECK(std::abs(p.row(i).norm() - 1.0) <= 1e-6);
}

TEST_CASE("synthetic dataset is deterministic and normalized") {
  DatasetSpec spec;
  spec.clouds_per_family = 3;
  spec.points_per_block = 256;
  spec.families = {ShapeFamily::kSphere, ShapeFamily::kBox, ShapeFamily::kTorus, ShapeFamily::kRidgedPlane};
  const auto a = synth_dataset(spec);
  const auto b = synth_dataset(spec);
  REQUIRE(a.size() == 12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].points == b[i].points);
    CHECK(a[i].size() == 256);
    CHECK(a[i].points.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  }
  spec.seed = 1;
  CHECK(synth_dataset(spec)[0].points != a[0].points);
}

TEST_CASE("nonuniform sampling shows octant contrast on a sphere") {
  const Points pool = sample_surface(ShapeFamily::kSphere, 8192, 21);
  const PointCloud s = nonuniform_sample(PointCloud(pool), 1024, 0.8, 4);
  std::array<int, 8> counts{};
  for (Index i = 0; i < s.size(); ++i) {
    const int o = (s.points(i, 0) > 0) + 2 * (s.points(i, 1) > 0) + 4 * (s.points(i, 2) > 0);
    ++counts[static_cast<std::size_t>(o)];
  }
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  CHECK(*hi >= 2 * *lo);
}

TEST_CASE("uniform subsampling passes chi-square") {
  // 20 points, 5 drawn per repeat, 1000 repeats: each point expected 250 times.
  const Points p = random_points(20, 8);
  std::vector<int> hits(20, 0);
  for (int r = 0; r < 1000; ++r) {
    for (Index i : nonuniform_sample_indices(PointCloud(p), 5, 0.0, derive_seed(99, r))) ++hits[static_cast<std::size_t>(i)];
  }
  double chi2 = 0.0;
  for (int h : hits) chi2 += (h - 250.0) * (h - 250.0) / 250.0;
  // 19 dof, p = 0.01 critical value.
  CHECK(chi2 < 36.19);
}

TEST_CASE("nonuniform sampling edge cases") {
  const Points p = random_points(50, 2);
  const auto all = nonuniform_sample_indices(PointCloud(p), 50, 0.7, 1);
  CHECK(std::set<Index>(all.begin(), all.end()).size() == 50);
  CHECK_THROWS_AS(nonuniform_sample(PointCloud(p), 51, 0.5, 1), InvalidArgument);
  CHECK(nonuniform_sample(PointCloud(p), 20, 0.5, 7).points == nonuniform_sample(PointCloud(p), 20, 0.5, 7).points);

  // Strength 1 on a segment: top half gets at least twice the bottom.
  Points line(2000, 3);
  line.setZero();
  for (Index i = 0; i < 2000; ++i) line(i, 0) = static_cast<double>(i) / 1999.0;
  double top = 0, bottom = 0;
  for (int r = 0; r < 20; ++r) {
    // The density axis is random; measure along its projection.
    Rng rng(derive_seed(5, r));
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    const auto idx = nonuniform_sample_indices(PointCloud(line), 200, 1.0, derive_seed(5, r));
    for (Index i : idx) (((line(i, 0) - 0.5) * axis[0]) > 0 ? top : bottom) += 1;
  }
  CHECK(top >= 2.0 * bottom);
}

TEST_CASE("fps hand examples") {
  Points line(4, 3);
  line << 0, 0, 0, 1, 0, 0, 2, 0, 0, 9, 0, 0;
  CHECK(fps(line, 2, 0) == std::vector<Index>{0, 3});

  Points sq(5, 3);
  sq << 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0, 0.5, 0.5, 0;
  auto idx = fps(sq, 4, 0);
  std::sort(idx.begin(), idx.end());
  CHECK(idx == std::vector<Index>{0, 1, 2, 3});

  const Points p = random_points(33, 4);
  auto perm = fps(p, 33, 5);
  std::sort(perm.begin(), perm.end());
  for (Index i = 0; i < 33; ++i) CHECK(perm[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("fps matches greedy re-simulation") {
  for (int t = 0; t < 20; ++t) {
    const Index n = 8 + (t * 37) % 200;
    const Points p = random_points(n, 100 + t);
    const Index m = 1 + (t * 13) % n;
    CHECK(fps(p, m, t % n) == cotpcc::testing::brute_fps(p, m, t % n));
  }
}

TEST_CASE("fps breaks ties by lowest index") {
  Points p(5, 3);
  p << 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0;
  CHECK(fps(p, 2, 0) == std::vector<Index>{0, 1});
}
