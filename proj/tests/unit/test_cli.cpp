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

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "../support/support.hpp"
#include "cotpcc/bitstream.hpp"
#include "cotpcc/cloud.hpp"
#include "cotpcc/metrics.hpp"
#include "cotpcc/pipeline.hpp"
#include "cotpcc/rd.hpp"

#ifndef COTPCC_CLI_PATH
#error "COTPCC_CLI_PATH must name the cotpcc executable"
#endif

using namespace cotpcc;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI with stdout captured to a file and stderr discarded.
Run cli(const std::string& args, const fs::path& dir) {
  const fs::path capture = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + COTPCC_CLI_PATH + "\" " + args + " > \"" + capture.string() +
                          "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(capture);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

double field(const std::string& text, const std::string& key) {
  const auto at = text.find(key + " ");
  REQUIRE(at != std::string::npos);
  return std::stod(text.substr(at + key.size() + 1));
}

const char* kTrainFlags = " --points 256 --clouds-per-family 1";

}  // namespace

TEST_CASE("usage errors exit 2") {
  const auto dir = cotpcc::testing::scratch_dir("cli_usage");
  CHECK(cli("", dir).code == 2);
  CHECK(cli("compress --input x.xyz", dir).code == 2);
  CHECK(cli("train --dataset d --out o --sampler nearest", dir).code == 2);
  CHECK(cli("train --dataset d --out o --ratios 0.5,0.5", dir).code == 2);
  CHECK(cli("--help", dir).code == 0);
}

TEST_CASE("data errors exit 3") {
  const auto dir = cotpcc::testing::scratch_dir("cli_data");
  std::ofstream(dir / "bad.xyz") << "0 0 0\n1 nan 2\n";
  CHECK(cli("evaluate --reference " + (dir / "bad.xyz").string() + " --input " + (dir / "bad.xyz").string(), dir)
            .code == 3);
  CHECK(cli("plot --input " + (dir / "missing.csv").string() + " --out " + (dir / "p.svg").string(), dir).code != 0);
}

TEST_CASE("prepare, train, compress, decompress, evaluate") {
  const auto dir = cotpcc::testing::scratch_dir("cli_flow");
  const std::string data = (dir / "data").string();
  REQUIRE(cli("prepare --out " + data + kTrainFlags, dir).code == 0);
  const auto first = read_dataset(data).manifest.at("dataset_digest");
  REQUIRE(cli("prepare --out " + (dir / "data2").string() + kTrainFlags, dir).code == 0);
  CHECK(read_dataset(dir / "data2").manifest.at("dataset_digest") == first);

  const std::string run_a = (dir / "a").string(), run_b = (dir / "b").string();
  REQUIRE(cli("train --dataset " + data + " --out " + run_a + " --batch-size 2 --max-steps 1 --seed 1 --lambda 0.01", dir).code == 0);
  REQUIRE(cli("train --dataset " + data + " --out " + run_b + " --batch-size 2 --max-steps 1 --seed 2 --lambda 0.1", dir).code == 0);
  const std::string ckpt_a = run_a + "/final.ckpt", ckpt_b = run_b + "/final.ckpt";
  REQUIRE(fs::exists(ckpt_a));

  const PreparedDataset prepared = read_dataset(data);
  const fs::path input = dir / "in.xyz";
  write_cloud(input, prepared.clouds[0]);
  const std::string cotp = (dir / "in.cotp").string(), decoded = (dir / "out.xyz").string();
  const Run comp = cli("compress --checkpoint " + ckpt_a + " --input " + input.string() + " --out " + cotp, dir);
  REQUIRE(comp.code == 0);
  REQUIRE(cli("decompress --checkpoint " + ckpt_a + " --input " + cotp + " --out " + decoded, dir).code == 0);

  // The decoded file must reproduce the distortion compress reported.
  const Points source = load_cloud(input).points;
  const Points rec = load_cloud(decoded).points;
  CHECK(std::abs(chamfer_l2(source, rec) - field(comp.out, "cd")) <= 1e-9);
  const Bitstream bs = read_bitstream(cotp);
  CHECK(field(comp.out, "bpp") == compute_bpp(bs, static_cast<std::uint64_t>(source.rows())));

  const Run ev = cli("evaluate --reference " + input.string() + " --input " + decoded + " --bitstream " + cotp, dir);
  REQUIRE(ev.code == 0);
  const std::string row = ev.out.substr(ev.out.find('\n') + 1);
  CHECK(std::abs(std::stod(row) - field(comp.out, "cd")) <= 1e-9);

  // A model with different weights must refuse the stream.
  CHECK(cli("decompress --checkpoint " + ckpt_b + " --input " + cotp + " --out " + decoded, dir).code == 4);

  // Input outside the unit cube.
  Points big = source * 3.0;
  write_cloud(dir / "big.xyz", PointCloud(big));
  CHECK(cli("compress --checkpoint " + ckpt_a + " --input " + (dir / "big.xyz").string() + " --out " + cotp, dir)
            .code == 3);

  // Evaluate in dataset mode, merge and plot.
  const std::string csv_a = (dir / "a.csv").string(), csv_b = (dir / "b.csv").string();
  REQUIRE(cli("evaluate --checkpoint " + ckpt_a + " --dataset " + data + " --out " + csv_a + " --model m", dir).code == 0);
  REQUIRE(cli("evaluate --checkpoint " + ckpt_b + " --dataset " + data + " --out " + csv_b + " --model m", dir).code == 0);
  const std::string merged = (dir / "rd.csv").string();
  REQUIRE(cli("rd-curve --input " + csv_a + " " + csv_b + " --out " + merged, dir).code == 0);
  const auto rows = read_rd_csv(fs::path(merged));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].bpp <= rows[1].bpp);
  REQUIRE(cli("plot --input " + merged + " --out " + (dir / "rd.svg").string(), dir).code == 0);
  CHECK(fs::file_size(dir / "rd.svg") > 0);
  // One point per model is not a curve.
  CHECK(cli("rd-curve --input " + csv_a + " --out " + merged, dir).code == 2);
  CHECK(cli("plot --input " + csv_a + " --out " + (dir / "rd.svg").string(), dir).code == 2);
}
