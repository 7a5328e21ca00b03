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


#ifndef COTPCC_TRAINING_HPP_
#define COTPCC_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotpcc/losses.hpp"

namespace cotpcc {

struct TrainConfig {
  ModelConfig model;
  LossWeights weights;
  int epochs = 50;
  double learning_rate = 1e-4;
  // Adam rate of the entropy-model parameters (priors and feature scales).
  double entropy_learning_rate = 1e-3;
  int batch_size = 8;
  int disc_steps_per_gen_step = 1;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
  std::int64_t max_steps = -1;        // cap on total steps; -1 runs the full schedule

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Exponential moving averages of the logged terms.
struct RunningAverages {
  static constexpr double kDecay = 0.98;
  double cost_c = 0.0;
  double d_wass = 0.0;
  double l_otr = 0.0;
  double rate_bpp = 0.0;
  std::int64_t count = 0;

  void update(const LossBreakdown& loss);
};

// Everything that evolves during training.
class TrainState {
 public:
  explicit TrainState(const TrainConfig& config);
  TrainState(const TrainState&) = delete;
  TrainState& operator=(const TrainState&) = delete;

  TrainConfig config;
  std::unique_ptr<Generator> generator;
  std::unique_ptr<Critic> critic;
  nn::Adam generator_optimizer;
  nn::Adam entropy_optimizer;
  nn::Adam critic_optimizer;
  std::int64_t step = 0;
  int consecutive_failures = 0;
  RunningAverages averages;

  std::vector<Var> network_parameters() const;  // sampler, encoder, decoder
  std::vector<Var> entropy_parameters() const;
};

// Parameter digests around the two sub-steps of one step.
struct StepTrace {
  std::uint64_t generator_before = 0, critic_before = 0;
  std::uint64_t generator_after_critic = 0, critic_after_critic = 0;
  std::uint64_t generator_after = 0, critic_after = 0;
};

struct StepResult {
  LossBreakdown loss;
  bool skipped = false;  // non-finite values; parameters were restored
};

// Critic ascent step(s) on detached reconstructions, then one generator
// descent step against the updated critic. Throws DivergenceError after
// three consecutive skipped steps.
StepResult train_step(TrainState& state, std::span<const Points> batch, StepTrace* trace = nullptr);

struct CheckpointMeta {
  std::int64_t step = 0;
  int epoch = 0;
  nlohmann::json config;
  std::uint64_t generator_digest = 0;
  std::uint64_t critic_digest = 0;
  RunningAverages averages;
  double lambda = 0.0;
  std::filesystem::path path;
};

struct FitOptions {
  std::filesystem::path out_dir;  // empty: no files written
  std::function<void(std::int64_t step, const StepResult&)> on_step;
};

std::int64_t steps_per_epoch(std::size_t dataset_size, int batch_size);
// Dataset order for one epoch.
std::vector<std::size_t> epoch_order(std::size_t dataset_size, std::uint64_t seed, int epoch);
std::uint64_t dataset_digest(std::span<const PointCloud> dataset);

// Runs (or resumes, from state.step) the configured schedule. Writes
// train_log.jsonl, periodic and final checkpoints and manifest.json into
// out_dir.
CheckpointMeta fit(std::span<const PointCloud> dataset, TrainState& state, const FitOptions& options = {});

// One model per lambda (shared seeds), each in out_dir/lambda_<value>.
std::vector<CheckpointMeta> sweep_lambda(std::span<const PointCloud> dataset, const TrainConfig& config,
                                         std::span<const double> lambdas, const FitOptions& options = {});

// Checkpoint persistence.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path);
CheckpointMeta checkpoint_meta(const TrainState& state);

}  // namespace cotpcc

#endif  // COTPCC_TRAINING_HPP_
