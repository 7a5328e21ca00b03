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


#include "cotpcc/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cotpcc/errors.hpp"

namespace cotpcc {

using nlohmann::json;

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t cloud_digest(const Points& p) {
  Digest d;
  d.update(p.data(), static_cast<std::size_t>(p.size()) * sizeof(double));
  return d.value();
}

}  // namespace

MetricReport evaluate_reconstruction(const Points& reference, const Points& reconstruction,
                                     const Bitstream* bitstream) {
  MetricReport r;
  r.cd = chamfer_l2(reference, reconstruction);
  r.psnr_db = psnr_point_to_plane(reference, reconstruction);
  r.n_source_points = reference.rows();
  if (bitstream != nullptr) {
    r.payload_bits = bitstream->payload_bits();
    r.header_bits = bitstream->header_bits();
    r.bpp = compute_bpp(*bitstream, static_cast<std::uint64_t>(reference.rows()));
  }
  return r;
}

BlockResult code_block(const Generator& generator, const Points& block) {
  BlockResult out;
  out.bitstream = parse_bitstream(serialize(generator.compress(block)));
  out.reconstruction = generator.decompress(out.bitstream);
  out.report = evaluate_reconstruction(block, out.reconstruction, &out.bitstream);
  return out;
}

DatasetResult evaluate_dataset(const Generator& generator, std::span<const PointCloud> dataset) {
  if (dataset.empty()) throw InvalidArgument("evaluate: empty dataset");
  DatasetResult result;
  std::uint64_t bits = 0;
  std::uint64_t points = 0;
  for (const auto& cloud : dataset) {
    const BlockResult block = code_block(generator, cloud.points);
    bits += block.report.payload_bits;
    points += static_cast<std::uint64_t>(cloud.size());
    result.cd += block.report.cd;
    result.psnr_db += block.report.psnr_db;
    result.blocks.push_back(block.report);
  }
  const auto n = static_cast<double>(dataset.size());
  result.cd /= n;
  result.psnr_db /= n;
  result.bpp = static_cast<double>(bits) / static_cast<double>(points);
  return result;
}

RDRecord to_rd_record(const std::string& model, double lambda, const DatasetResult& result) {
  return {model, lambda, result.bpp, result.cd * 1e3, result.psnr_db};
}

std::vector<PointCloud> build_dataset(const DatasetSpec& spec) {
  spec.validate();
  std::vector<PointCloud> clouds =
      spec.source == DatasetSpec::Source::kSynthetic ? synth_dataset(spec) : blocks_from_files(spec);
  if (clouds.empty()) throw DataError("dataset is empty (no block holds enough points)");
  // Stored as float32 PLY; keep the in-memory copy identical to what is read back.
  for (auto& c : clouds) c.points = c.points.cast<float>().cast<double>();
  return clouds;
}

json write_dataset(const std::filesystem::path& dir, std::span<const PointCloud> clouds, const DatasetSpec& spec) {
  const auto blocks_dir = dir / "blocks";
  std::filesystem::create_directories(blocks_dir);
  json entries = json::array();
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "block_%05zu.ply", i);
    write_cloud(blocks_dir / name, clouds[i], CloudFormat::kPlyBinary);
    entries.push_back({{"file", std::string("blocks/") + name},
                       {"source_id", clouds[i].source_id},
                       {"points", clouds[i].size()},
                       {"digest", hex(cloud_digest(clouds[i].points))}});
  }
  json manifest = {{"format", "cotpcc-dataset"},
                   {"source", spec.source == DatasetSpec::Source::kSynthetic ? "synthetic" : "files"},
                   {"seed", spec.seed},
                   {"points_per_block", spec.points_per_block},
                   {"nonuniformity", spec.nonuniformity},
                   {"block_edge", spec.block_edge},
                   {"cube_edge", spec.cube_edge},
                   {"count", clouds.size()},
                   {"dataset_digest", hex(dataset_digest(clouds))},
                   {"clouds", entries}};
  if (spec.source == DatasetSpec::Source::kSynthetic) {
    json families = json::array();
    for (auto f : spec.families) families.push_back(to_string(f));
    manifest["families"] = families;
    manifest["clouds_per_family"] = spec.clouds_per_family;
  } else {
    json scenes = json::array();
    for (const auto& file : spec.files) {
      const PointCloud scene = load_cloud(file);
      const auto blocks = partition_blocks(scene, spec.cube_edge, spec.block_edge);
      json counts = json::array();
      Index total = 0;
      for (const auto& b : blocks) {
        counts.push_back({{"origin", {b.origin.x(), b.origin.y(), b.origin.z()}},
                          {"points", b.cloud.size()},
                          {"emitted", b.cloud.size() >= spec.points_per_block}});
        total += b.cloud.size();
      }
      scenes.push_back({{"file", file.string()}, {"source_points", scene.size()}, {"block_points", total},
                        {"blocks", counts}});
    }
    manifest["scenes"] = scenes;
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  return manifest;
}

PreparedDataset read_dataset(const std::filesystem::path& dir) {
  PreparedDataset out;
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("not a prepared dataset (missing manifest.json): " + dir.string());
  try {
    out.manifest = json::parse(in);
    for (const auto& entry : out.manifest.at("clouds")) {
      PointCloud c = load_cloud(dir / entry.at("file").get<std::string>());
      c.source_id = entry.at("source_id").get<std::string>();
      if (hex(cloud_digest(c.points)) != entry.at("digest").get<std::string>()) {
        throw DataError("dataset block " + entry.at("file").get<std::string>() + " does not match its digest");
      }
      out.clouds.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed dataset manifest: ") + e.what());
  }
  if (out.clouds.empty()) throw DataError("dataset is empty: " + dir.string());
  return out;
}

std::pair<std::vector<PointCloud>, std::vector<PointCloud>> split_holdout(std::span<const PointCloud> dataset,
                                                                          std::size_t stride) {
  if (stride < 2) throw InvalidArgument("holdout stride must be at least 2");
  std::pair<std::vector<PointCloud>, std::vector<PointCloud>> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) (i % stride == 0 ? out.second : out.first).push_back(dataset[i]);
  return out;
}

AblationResult run_ablation(std::span<const PointCloud> train, std::span<const PointCloud> eval,
                            const TrainConfig& config, const std::filesystem::path& out_dir) {
  AblationResult result;
  for (SamplerKind kind : {SamplerKind::kFps, SamplerKind::kLearned}) {
    TrainConfig c = config;
    c.model.sampler = kind;
    TrainState state(c);
    FitOptions options;
    if (!out_dir.empty()) options.out_dir = out_dir / to_string(kind);
    fit(train, state, options);
    const RDRecord row = to_rd_record(kind == SamplerKind::kFps ? "fps" : "sampler", c.weights.lambda,
                                      evaluate_dataset(*state.generator, eval));
    (kind == SamplerKind::kFps ? result.fps : result.learned) = row;
  }
  result.learned_wins = static_cast<int>(result.learned.bpp < result.fps.bpp) +
                        static_cast<int>(result.learned.cd_e3 < result.fps.cd_e3) +
                        static_cast<int>(result.learned.psnr_db > result.fps.psnr_db);
  return result;
}

std::vector<RDRecord> run_rd_sweep(std::span<const PointCloud> train, std::span<const PointCloud> eval,
                                   const TrainConfig& config, std::span<const double> lambdas,
                                   const std::string& model, const std::filesystem::path& out_dir) {
  if (lambdas.empty()) throw InvalidArgument("rd sweep: no lambda values");
  std::vector<RDRecord> rows;
  for (double lambda : lambdas) {
    TrainConfig c = config;
    c.weights.lambda = lambda;
    TrainState state(c);
    FitOptions options;
    if (!out_dir.empty()) {
      std::ostringstream name;
      name << "lambda_" << lambda;
      options.out_dir = out_dir / name.str();
    }
    fit(train, state, options);
    rows.push_back(to_rd_record(model, lambda, evaluate_dataset(*state.generator, eval)));
  }
  return rows;
}

}  // namespace cotpcc
