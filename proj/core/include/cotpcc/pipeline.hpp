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


#ifndef COTPCC_PIPELINE_HPP_
#define COTPCC_PIPELINE_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cotpcc/metrics.hpp"
#include "cotpcc/rd.hpp"
#include "cotpcc/training.hpp"

namespace cotpcc {

// Metrics of a reconstruction against its reference. The bitstream, when
// given, supplies the rate fields.
MetricReport evaluate_reconstruction(const Points& reference, const Points& reconstruction,
                                     const Bitstream* bitstream = nullptr);

struct BlockResult {
  Bitstream bitstream;
  Points reconstruction;
  MetricReport report;
};

// compress -> decompress -> metrics for one normalized block.
BlockResult code_block(const Generator& generator, const Points& block);

struct DatasetResult {
  std::vector<MetricReport> blocks;
  double bpp = 0.0;      // total payload bits / total source points
  double cd = 0.0;       // mean over blocks
  double psnr_db = 0.0;  // mean over blocks
};

DatasetResult evaluate_dataset(const Generator& generator, std::span<const PointCloud> dataset);
RDRecord to_rd_record(const std::string& model, double lambda, const DatasetResult& result);

// Prepared dataset directory: blocks/*.ply plus manifest.json.
struct PreparedDataset {
  std::vector<PointCloud> clouds;
  nlohmann::json manifest;
};
nlohmann::json write_dataset(const std::filesystem::path& dir, std::span<const PointCloud> clouds,
                             const DatasetSpec& spec);
PreparedDataset read_dataset(const std::filesystem::path& dir);
// Clouds from `spec` (synthetic or file scenes).
std::vector<PointCloud> build_dataset(const DatasetSpec& spec);

// Deterministic split of a dataset: every `stride`-th cloud is held out.
std::pair<std::vector<PointCloud>, std::vector<PointCloud>> split_holdout(std::span<const PointCloud> dataset,
                                                                          std::size_t stride);

// Twin runs that differ only in the sampler; rows are FPS then learned.
struct AblationResult {
  RDRecord fps;
  RDRecord learned;
  int learned_wins = 0;  // columns (bpp lower, cd lower, psnr higher) where the learned sampler is better
};
AblationResult run_ablation(std::span<const PointCloud> train, std::span<const PointCloud> eval,
                            const TrainConfig& config, const std::filesystem::path& out_dir = {});

// One trained model per lambda, evaluated on `eval`.
std::vector<RDRecord> run_rd_sweep(std::span<const PointCloud> train, std::span<const PointCloud> eval,
                                   const TrainConfig& config, std::span<const double> lambdas,
                                   const std::string& model, const std::filesystem::path& out_dir = {});

}  // namespace cotpcc

#endif  // COTPCC_PIPELINE_HPP_
