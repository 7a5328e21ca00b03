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
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "../support/support.hpp"
#include "cotpcc/errors.hpp"
#include "cotpcc/pipeline.hpp"
#include "cotpcc/rd.hpp"

using namespace cotpcc;
using cotpcc::testing::scratch_dir;

namespace {

std::vector<RDRecord> sample_rows() {
  return {{"cotpcc", 0.1, 2.5, 0.9, 41.25}, {"cotpcc", 0.01, 3.25, 0.5, 43.0}, {"cotpcc", 1.0, 1.0 / 3.0, 1.5, 38.0},
          {"fps", 0.1, 2.75, 1.1, 40.0}, {"fps", 1.0, 0.5, 1.9, 37.5}};
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.batch_size = 2;
  c.epochs = 1;
  c.max_steps = 1;
  return c;
}

}  // namespace

TEST_CASE("RD CSV round trip is exact") {
  std::stringstream s;
  write_rd_csv(s, sample_rows());
  const auto back = read_rd_csv(s);
  CHECK(back == sample_rows());
}

TEST_CASE("RD CSV schema checks") {
  std::stringstream reordered("#cotpcc-rd-csv 1\nlambda,model,cd_e3,bpp,psnr_db\n0.5,m,1,2,30\n");
  const auto r = read_rd_csv(reordered);
  REQUIRE(r.size() == 1);
  CHECK(r[0].bpp == 2.0);
  CHECK(r[0].cd_e3 == 1.0);
  std::stringstream unknown("model,lambda,bpp,cd_e3,psnr_db,extra\nm,1,1,1,1,1\n");
  CHECK_THROWS_WITH_AS(read_rd_csv(unknown), doctest::Contains("unknown column"), ParseError);
  std::stringstream missing("model,lambda,bpp,cd_e3\nm,1,1,1\n");
  CHECK_THROWS_AS(read_rd_csv(missing), ParseError);
  std::stringstream bad("model,lambda,bpp,cd_e3,psnr_db\nm,1,x,1,1\n");
  CHECK_THROWS_WITH_AS(read_rd_csv(bad), doctest::Contains("line 2"), ParseError);
}

TEST_CASE("RD curves sort by bpp and refuse thin or duplicate input") {
  const auto rows = sample_rows();
  const auto curves = rd_curves(rows);
  REQUIRE(curves.size() == 2);
  REQUIRE(curves[0].points.size() == 3);
  CHECK(curves[0].points[0].bpp < curves[0].points[1].bpp);
  CHECK(curves[0].points[1].bpp < curves[0].points[2].bpp);

  auto dup = rows;
  dup.push_back(rows[0]);
  CHECK_THROWS_WITH_AS(rd_curves(dup), doctest::Contains("duplicate RD point"), InvalidArgument);
  std::vector<RDRecord> thin{rows[0], rows[3], rows[4]};
  CHECK_THROWS_AS(rd_curves(thin), InvalidArgument);

  const std::string svg = render_rd_svg(curves);
  CHECK(svg.find("<svg") != std::string::npos);
  // Two panels, one polyline per model in each.
  std::size_t count = 0;
  for (std::size_t at = svg.find("class=\"curve\""); at != std::string::npos; at = svg.find("class=\"curve\"", at + 1)) ++count;
  CHECK(count == 4);
  const auto at = svg.find("data-model=\"cotpcc\"");
  REQUIRE(at != std::string::npos);
  const auto points = svg.find("points=\"", at);
  REQUIRE(points != std::string::npos);
  const std::string list = svg.substr(points + 8, svg.find('"', points + 8) - points - 8);
  std::istringstream in(list);
  std::vector<double> xs;
  std::string pair;
  while (in >> pair) xs.push_back(std::stod(pair.substr(0, pair.find(','))));
  CHECK(xs.size() == 3);
  CHECK(std::is_sorted(xs.begin(), xs.end()));
}

TEST_CASE("evaluate_reconstruction on identical clouds") {
  const Points p = sample_surface(ShapeFamily::kTorus, 512, 1);
  const MetricReport r = evaluate_reconstruction(p, p);
  CHECK(r.cd == 0.0);
  CHECK(r.psnr_db == kPsnrCapDb);
  CHECK(r.n_source_points == 512);
}

TEST_CASE("code_block is self-consistent") {
  const TrainState state(tiny_config());
  DatasetSpec spec;
  spec.points_per_block = 256;
  spec.clouds_per_family = 1;
  const auto data = synth_dataset(spec);
  const BlockResult b = code_block(*state.generator, data[0].points);
  CHECK(b.report.cd == doctest::Approx(chamfer_l2(data[0].points, b.reconstruction)).epsilon(1e-12));
  CHECK(b.report.bpp == compute_bpp(b.bitstream, 256));
  CHECK(b.report.payload_bits == b.bitstream.payload_bits());
  CHECK(b.reconstruction == state.generator->reconstruct(data[0].points));

  const DatasetResult all = evaluate_dataset(*state.generator, data);
  std::uint64_t bits = 0;
  for (const auto& r : all.blocks) bits += r.payload_bits;
  CHECK(all.bpp == doctest::Approx(static_cast<double>(bits) / (3 * 256)).epsilon(1e-15));
  const RDRecord row = to_rd_record("x", 0.1, all);
  CHECK(row.cd_e3 == doctest::Approx(all.cd * 1e3));
}

TEST_CASE("prepared datasets are reproducible and tamper evident") {
  DatasetSpec spec;
  spec.points_per_block = 128;
  spec.clouds_per_family = 2;
  const auto dir = scratch_dir("dataset");
  const auto clouds = build_dataset(spec);
  const auto m1 = write_dataset(dir / "a", clouds, spec);
  const auto m2 = write_dataset(dir / "b", build_dataset(spec), spec);
  CHECK(m1.at("dataset_digest") == m2.at("dataset_digest"));
  const PreparedDataset back = read_dataset(dir / "a");
  REQUIRE(back.clouds.size() == clouds.size());
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    CHECK(back.clouds[i].points == clouds[i].points);
    CHECK(back.clouds[i].points.cwiseAbs().maxCoeff() <= 1.0);
  }

  // Corrupt one block.
  const auto block = dir / "a" / m1.at("clouds")[1].at("file").get<std::string>();
  Points other = clouds[0].points;
  write_cloud(block, PointCloud(other), CloudFormat::kPlyBinary);
  CHECK_THROWS_AS(read_dataset(dir / "a"), DataError);

  const auto [train, eval] = split_holdout(clouds, 3);
  CHECK(eval.size() == 2);
  CHECK(train.size() + eval.size() == clouds.size());
}

TEST_CASE("file-sourced datasets account for every scene point") {
  const auto dir = scratch_dir("scene");
  const Points scene = cotpcc::testing::random_points(6000, 3, 0.0, 30.0);
  write_cloud(dir / "scene.xyz", PointCloud(scene));
  DatasetSpec spec;
  spec.source = DatasetSpec::Source::kFiles;
  spec.files = {dir / "scene.xyz"};
  spec.points_per_block = 64;
  spec.block_edge = 25.0;
  const auto clouds = build_dataset(spec);
  CHECK(!clouds.empty());
  const auto manifest = write_dataset(dir / "out", clouds, spec);
  const auto& s = manifest.at("scenes")[0];
  CHECK(s.at("source_points").get<Index>() == 6000);
  Index total = 0;
  for (const auto& b : s.at("blocks")) total += b.at("points").get<Index>();
  CHECK(total == 6000);
  for (const auto& c : clouds) CHECK(c.points.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
}
