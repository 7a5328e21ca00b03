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


#include "cotpcc/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cotpcc/errors.hpp"
#include "cotpcc/metrics.hpp"

namespace cotpcc {

using nlohmann::json;

namespace {

constexpr std::uint64_t kGeneratorInit = 1;
constexpr std::uint64_t kCriticInit = 2;
constexpr std::uint64_t kStepNoise = 3;
constexpr std::uint64_t kEpochOrder = 4;

json prior_to_json(const FactorizedModel::Init& p) {
  return {{"components", p.components}, {"center", p.center}, {"spread", p.spread}, {"scale", p.scale}};
}

FactorizedModel::Init prior_from_json(const json& j) {
  FactorizedModel::Init p;
  p.components = j.at("components").get<Index>();
  p.center = j.at("center").get<double>();
  p.spread = j.at("spread").get<double>();
  p.scale = j.at("scale").get<double>();
  return p;
}

bool all_finite(const std::vector<Var>& grads) {
  for (const auto& g : grads) {
    if (g.defined() && !g.value().allFinite()) return false;
  }
  return true;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  weights.validate();
  model.quantizer.validate();
  if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (!(learning_rate > 0.0) || !(entropy_learning_rate > 0.0)) {
    throw InvalidArgument("learning rates must be positive");
  }
  if (batch_size < 1) throw InvalidArgument("batch size must be positive");
  if (disc_steps_per_gen_step < 1) throw InvalidArgument("discriminator steps per generator step must be positive");
  if (checkpoint_every < 0) throw InvalidArgument("checkpoint interval must be non-negative");
  for (double r : model.ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw InvalidArgument("ratios must lie in (0, 1]");
    if (expansion_factor(r) > model.net.max_expansion) {
      throw InvalidArgument("ratio " + std::to_string(r) + " needs more children per point than the decoder supports");
    }
  }
}

json to_json(const TrainConfig& c) {
  const NetConfig& n = c.model.net;
  json net = {{"knn", n.knn},
              {"lift_dim", n.lift_dim},
              {"transformer_dim", n.transformer_dim},
              {"edge_dims", n.edge_dims},
              {"stage_dim", n.stage_dim},
              {"latent_dim", n.latent_dim},
              {"decoder_dim", n.decoder_dim},
              {"offset_scales", n.offset_scales},
              {"max_expansion", n.max_expansion},
              {"refine_scale", n.refine_scale},
              {"output_clamp", n.output_clamp},
              {"disc_dim", n.disc_dim},
              {"disc_blocks", n.disc_blocks},
              {"leaky_slope", n.leaky_slope}};
  json model = {{"net", net},
                {"coord_step", c.model.quantizer.coord_step},
                {"feature_step", c.model.quantizer.feature_step},
                {"coord_prior", prior_to_json(c.model.coord_prior)},
                {"feature_prior", prior_to_json(c.model.feature_prior)},
                {"sampler", to_string(c.model.sampler)},
                {"ratios", c.model.ratios}};
  return {{"model", model},
          {"beta", c.weights.beta},
          {"gamma", c.weights.gamma},
          {"lambda", c.weights.lambda},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"entropy_learning_rate", c.entropy_learning_rate},
          {"batch_size", c.batch_size},
          {"disc_steps_per_gen_step", c.disc_steps_per_gen_step},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"max_steps", c.max_steps}};
}

TrainConfig train_config_from_json(const json& j) {
  try {
    TrainConfig c;
    const json& m = j.at("model");
    const json& n = m.at("net");
    NetConfig& net = c.model.net;
    net.knn = n.at("knn").get<Index>();
    net.lift_dim = n.at("lift_dim").get<Index>();
    net.transformer_dim = n.at("transformer_dim").get<Index>();
    net.edge_dims = n.at("edge_dims").get<std::array<Index, 3>>();
    net.stage_dim = n.at("stage_dim").get<Index>();
    net.latent_dim = n.at("latent_dim").get<Index>();
    net.decoder_dim = n.at("decoder_dim").get<Index>();
    net.offset_scales = n.at("offset_scales").get<std::array<double, 3>>();
    net.max_expansion = n.at("max_expansion").get<Index>();
    net.refine_scale = n.at("refine_scale").get<double>();
    net.output_clamp = n.at("output_clamp").get<double>();
    net.disc_dim = n.at("disc_dim").get<Index>();
    net.disc_blocks = n.at("disc_blocks").get<Index>();
    net.leaky_slope = n.at("leaky_slope").get<double>();
    c.model.quantizer.coord_step = m.at("coord_step").get<double>();
    c.model.quantizer.feature_step = m.at("feature_step").get<double>();
    c.model.coord_prior = prior_from_json(m.at("coord_prior"));
    c.model.feature_prior = prior_from_json(m.at("feature_prior"));
    c.model.sampler = sampler_kind_from_string(m.at("sampler").get<std::string>());
    c.model.ratios = m.at("ratios").get<Ratios>();
    c.weights.beta = j.at("beta").get<double>();
    c.weights.gamma = j.at("gamma").get<double>();
    c.weights.lambda = j.at("lambda").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.entropy_learning_rate = j.at("entropy_learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.disc_steps_per_gen_step = j.at("disc_steps_per_gen_step").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.checkpoint_every = j.at("checkpoint_every").get<std::int64_t>();
    c.max_steps = j.at("max_steps").get<std::int64_t>();
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed training config: ") + e.what());
  }
}

void RunningAverages::update(const LossBreakdown& loss) {
  const double a = count == 0 ? 1.0 : 1.0 - kDecay;
  cost_c += a * (loss.cost_c - cost_c);
  d_wass += a * (loss.d_wass - d_wass);
  l_otr += a * (loss.l_otr - l_otr);
  rate_bpp += a * (loss.rate_bpp - rate_bpp);
  ++count;
}

TrainState::TrainState(const TrainConfig& cfg)
    : config(cfg),
      generator_optimizer(cfg.learning_rate),
      entropy_optimizer(cfg.entropy_learning_rate),
      critic_optimizer(cfg.learning_rate) {
  config.validate();
  generator = std::make_unique<Generator>(config.model, derive_seed(config.seed, kGeneratorInit));
  critic = std::make_unique<Critic>(config.model.net, derive_seed(config.seed, kCriticInit));
}

std::vector<Var> TrainState::network_parameters() const {
  std::vector<Var> out;
  const auto stores = generator->stores();
  for (std::size_t i = 0; i + 1 < stores.size(); ++i) {
    const auto v = stores[i]->vars();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::vector<Var> TrainState::entropy_parameters() const { return generator->stores().back()->vars(); }

StepResult train_step(TrainState& state, std::span<const Points> batch, StepTrace* trace) {
  if (batch.empty()) throw InvalidArgument("train_step: empty batch");
  const LossWeights& w = state.config.weights;
  const Generator& gen = *state.generator;
  const Discriminator& critic = state.critic->net();
  const std::uint64_t step_seed = derive_seed(state.config.seed, kStepNoise, state.step);
  const auto count = static_cast<double>(batch.size());
  if (trace != nullptr) {
    trace->generator_before = gen.digest();
    trace->critic_before = state.critic->digest();
  }

  // Generator forward once; its graph is reused by the generator sub-step.
  std::vector<Generator::Output> outs;
  std::vector<Points> xhat;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    outs.push_back(gen.forward(batch[i], derive_seed(step_seed, i)));
    xhat.emplace_back(outs.back().xhat.value());
  }

  const std::vector<Var> critic_params = state.critic->parameters();
  std::vector<Matrix> critic_backup;
  for (const auto& p : critic_params) critic_backup.push_back(p.value());
  const nn::Adam critic_opt_backup = state.critic_optimizer;

  StepResult result;
  bool ok = true;
  try {
    for (int d = 0; d < state.config.disc_steps_per_gen_step && ok; ++d) {
      const Var objective = discriminator_objective(batch, xhat, critic, w);
      std::vector<Var> grads = ad::grad(objective, critic_params);
      ok = std::isfinite(objective.item()) && all_finite(grads);
      if (!ok) break;
      for (auto& g : grads) g = ad::constant(-g.value());  // ascent
      state.critic_optimizer.step(critic_params, grads);
    }
  } catch (const DivergenceError&) {
    ok = false;
  }
  if (trace != nullptr) {
    trace->generator_after_critic = gen.digest();
    trace->critic_after_critic = state.critic->digest();
  }

  std::vector<Var> network_grads, entropy_grads;
  LossBreakdown& loss = result.loss;
  if (ok) {
    try {
      Var total;
      std::vector<double> costs;
      double c_sum = 0.0, d_sum = 0.0, r_sum = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const Var x = ad::constant(Matrix(batch[i]));
        const Var c = chamfer_var(x, outs[i].xhat);
        double jx = 0.0;
        {
          ad::NoGradGuard guard;
          jx = critic.forward(x).item();
        }
        const Var d = ad::square(ad::add_scalar(critic.forward(outs[i].xhat), -jx));
        const Var r = ad::scale(ad::add(outs[i].coord_bits, outs[i].feature_bits),
                                1.0 / static_cast<double>(batch[i].rows()));
        const Var term = ad::add(ad::add(c, ad::scale(d, w.beta)), ad::scale(r, w.lambda));
        total = total.defined() ? ad::add(total, term) : term;
        costs.push_back(c.item());
        c_sum += c.item();
        d_sum += d.item();
        r_sum += r.item();
      }
      total = ad::scale(total, 1.0 / count);
      loss.cost_c = c_sum / count;
      loss.d_wass = d_sum / count;
      loss.rate_bpp = r_sum / count;
      loss.l_otr = ot_regularizer(batch, costs, critic, false).item();
      loss.total_gen = loss.cost_c + w.beta * loss.d_wass + w.gamma * loss.l_otr + w.lambda * loss.rate_bpp;
      loss.total_disc = w.beta * loss.d_wass - w.gamma * loss.l_otr;

      const auto network = state.network_parameters();
      const auto entropy = state.entropy_parameters();
      std::vector<Var> all(network);
      all.insert(all.end(), entropy.begin(), entropy.end());
      auto grads = ad::grad(total, all);
      ok = loss.finite() && std::isfinite(total.item()) && all_finite(grads);
      network_grads.assign(grads.begin(), grads.begin() + static_cast<std::ptrdiff_t>(network.size()));
      entropy_grads.assign(grads.begin() + static_cast<std::ptrdiff_t>(network.size()), grads.end());
      if (ok) {
        state.generator_optimizer.step(network, network_grads);
        state.entropy_optimizer.step(entropy, entropy_grads);
      }
    } catch (const DivergenceError&) {
      ok = false;
    }
  }

  ++state.step;
  if (!ok) {
    for (std::size_t i = 0; i < critic_params.size(); ++i) {
      Var p = critic_params[i];
      p.mutable_value() = critic_backup[i];
    }
    state.critic_optimizer = critic_opt_backup;
    result.skipped = true;
    if (++state.consecutive_failures >= 3) {
      throw DivergenceError("training diverged: non-finite losses on 3 consecutive steps (last step " +
                            std::to_string(state.step - 1) + ")");
    }
  } else {
    state.consecutive_failures = 0;
    state.averages.update(loss);
  }
  if (trace != nullptr) {
    trace->generator_after = gen.digest();
    trace->critic_after = state.critic->digest();
  }
  return result;
}

std::int64_t steps_per_epoch(std::size_t dataset_size, int batch_size) {
  if (batch_size < 1) throw InvalidArgument("batch size must be positive");
  return static_cast<std::int64_t>((dataset_size + static_cast<std::size_t>(batch_size) - 1) /
                                   static_cast<std::size_t>(batch_size));
}

std::vector<std::size_t> epoch_order(std::size_t dataset_size, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kEpochOrder, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(std::span<std::size_t>(order));
  return order;
}

std::uint64_t dataset_digest(std::span<const PointCloud> dataset) {
  Digest d;
  for (const auto& cloud : dataset) {
    d.update_value(cloud.size());
    d.update(cloud.points.data(), static_cast<std::size_t>(cloud.points.size()) * sizeof(double));
  }
  return d.value();
}

CheckpointMeta checkpoint_meta(const TrainState& state) {
  CheckpointMeta meta;
  meta.step = state.step;
  meta.config = to_json(state.config);
  meta.generator_digest = state.generator->digest();
  meta.critic_digest = state.critic->digest();
  meta.averages = state.averages;
  meta.lambda = state.config.weights.lambda;
  return meta;
}

CheckpointMeta fit(std::span<const PointCloud> dataset, TrainState& state, const FitOptions& options) {
  if (dataset.empty()) throw InvalidArgument("fit: empty dataset");
  const TrainConfig& config = state.config;
  const std::int64_t per_epoch = steps_per_epoch(dataset.size(), config.batch_size);
  std::int64_t total = per_epoch * config.epochs;
  if (config.max_steps >= 0) total = std::min(total, config.max_steps);

  const bool writing = !options.out_dir.empty();
  std::ofstream log;
  if (writing) {
    std::filesystem::create_directories(options.out_dir);
    log.open(options.out_dir / "train_log.jsonl", state.step > 0 ? std::ios::app : std::ios::trunc);
    if (!log) throw Error("cannot write training log in " + options.out_dir.string());
  }

  int cached_epoch = -1;
  std::vector<std::size_t> order;
  std::vector<Points> batch;
  while (state.step < total) {
    const auto epoch = static_cast<int>(state.step / per_epoch);
    const std::int64_t b = state.step % per_epoch;
    if (epoch != cached_epoch) {
      order = epoch_order(dataset.size(), config.seed, epoch);
      cached_epoch = epoch;
    }
    batch.clear();
    const auto begin = static_cast<std::size_t>(b * config.batch_size);
    const std::size_t end = std::min(dataset.size(), begin + static_cast<std::size_t>(config.batch_size));
    for (std::size_t i = begin; i < end; ++i) batch.push_back(dataset[order[i]].points);

    const std::int64_t step = state.step;
    const StepResult result = train_step(state, batch);
    if (writing) {
      json row = {{"step", step}, {"epoch", epoch}};
      if (result.skipped) {
        row["skipped"] = true;
      } else {
        row["cost_c"] = result.loss.cost_c;
        row["d_wass"] = result.loss.d_wass;
        row["l_otr"] = result.loss.l_otr;
        row["rate_bpp"] = result.loss.rate_bpp;
        row["total_gen"] = result.loss.total_gen;
        row["total_disc"] = result.loss.total_disc;
      }
      log << row.dump() << '\n';
      log.flush();
    }
    if (options.on_step) options.on_step(step, result);
    if (writing && config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0 &&
        state.step < total) {
      save_checkpoint(options.out_dir / ("checkpoint_" + std::to_string(state.step) + ".ckpt"), state);
    }
  }

  CheckpointMeta meta = checkpoint_meta(state);
  meta.epoch = static_cast<int>(state.step / per_epoch);
  if (writing) {
    meta.path = options.out_dir / "final.ckpt";
    save_checkpoint(meta.path, state);
    const json manifest = {{"config", meta.config},
                           {"seed", config.seed},
                           {"lambda", config.weights.lambda},
                           {"dataset_size", dataset.size()},
                           {"dataset_digest", hex(dataset_digest(dataset))},
                           {"steps", state.step},
                           {"generator_digest", hex(meta.generator_digest)},
                           {"critic_digest", hex(meta.critic_digest)},
                           {"checkpoint", meta.path.filename().string()},
                           {"log", "train_log.jsonl"}};
    std::ofstream out(options.out_dir / "manifest.json");
    out << manifest.dump(2) << '\n';
  }
  return meta;
}

std::vector<CheckpointMeta> sweep_lambda(std::span<const PointCloud> dataset, const TrainConfig& config,
                                         std::span<const double> lambdas, const FitOptions& options) {
  if (lambdas.empty()) throw InvalidArgument("sweep_lambda: no lambda values");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) throw InvalidArgument("sweep_lambda: lambda values must be positive");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw InvalidArgument("sweep_lambda: lambda values must be sorted");
  }
  std::vector<CheckpointMeta> out;
  for (double lambda : lambdas) {
    TrainConfig c = config;
    c.weights.lambda = lambda;
    TrainState state(c);
    FitOptions sub = options;
    if (!options.out_dir.empty()) {
      std::ostringstream name;
      name << "lambda_" << lambda;
      sub.out_dir = options.out_dir / name.str();
    }
    out.push_back(fit(dataset, state, sub));
  }
  return out;
}

}  // namespace cotpcc
