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


// cotpcc command-line tool.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cotpcc/errors.hpp"
#include "cotpcc/pipeline.hpp"

namespace {

using namespace cotpcc;

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kDigest = 4, kDiverged = 5 };

// Flags shared by the training-style commands.
struct TrainFlags {
  std::vector<double> lambdas{0.1};
  double beta = 100.0;
  double gamma = 0.001;
  std::vector<double> ratios{0.5, 0.5, 0.5};
  int epochs = 50;
  double lr = 1e-4;
  double entropy_lr = 1e-3;
  std::uint64_t seed = 0;
  int batch_size = 8;
  std::string sampler = "learned";
  std::int64_t max_steps = -1;
  std::int64_t checkpoint_every = 0;

  void add(CLI::App* app, bool many_lambdas) {
    if (many_lambdas) {
      app->add_option("--lambda", lambdas, "Rate weight(s); several values train one model each")->delimiter(',');
    } else {
      app->add_option("--lambda", lambdas, "Rate weight")->expected(1);
    }
    app->add_option("--beta", beta, "Wasserstein weight")->capture_default_str();
    app->add_option("--gamma", gamma, "OT regularizer weight")->capture_default_str();
    app->add_option("--ratios", ratios, "Three per-stage downsampling ratios, e.g. 0.5,0.5,0.333")
        ->delimiter(',')
        ->expected(3);
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--entropy-lr", entropy_lr, "Adam learning rate of the entropy models")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--batch-size", batch_size, "Clouds per step")->capture_default_str();
    app->add_option("--sampler", sampler, "Downsampler")->check(CLI::IsMember({"learned", "fps"}))->capture_default_str();
    app->add_option("--max-steps", max_steps, "Stop after this many steps (-1: full schedule)");
    app->add_option("--checkpoint-every", checkpoint_every, "Checkpoint interval in steps (0: final only)");
  }

  TrainConfig config() const {
    TrainConfig c;
    c.weights.beta = beta;
    c.weights.gamma = gamma;
    c.weights.lambda = lambdas.front();
    c.model.ratios = {ratios[0], ratios[1], ratios[2]};
    c.model.sampler = sampler_kind_from_string(sampler);
    c.epochs = epochs;
    c.learning_rate = lr;
    c.entropy_learning_rate = entropy_lr;
    c.seed = seed;
    c.batch_size = batch_size;
    c.max_steps = max_steps;
    c.checkpoint_every = checkpoint_every;
    c.validate();
    return c;
  }
};

std::string lambda_dir(double lambda) {
  std::ostringstream os;
  os << "lambda_" << lambda;
  return os.str();
}

void print_step(std::int64_t step, const StepResult& r) {
  if (r.skipped) {
    std::fprintf(stderr, "step %lld skipped (non-finite)\n", static_cast<long long>(step));
  } else if (step % 50 == 0) {
    std::fprintf(stderr, "step %6lld  cost_c %.5g  d_wass %.4g  l_otr %.4g  rate_bpp %.4g\n",
                 static_cast<long long>(step), r.loss.cost_c, r.loss.d_wass, r.loss.l_otr, r.loss.rate_bpp);
  }
}

std::vector<PointCloud> dataset_or_die(const std::string& dir) { return read_dataset(dir).clouds; }

Points normalized_input(const std::string& path) {
  const PointCloud cloud = load_cloud(path);
  cloud.validate();
  if (cloud.points.cwiseAbs().maxCoeff() > 1.0 + 1e-6) {
    throw DataError(path + ": coordinates must lie in [-1, 1]^3 (use `cotpcc prepare` to normalize scenes)");
  }
  return cloud.points;
}

std::unique_ptr<TrainState> checkpoint_or_die(const std::string& path) { return load_checkpoint(path); }

void print_rows(const std::vector<RDRecord>& rows) {
  std::printf("%-10s %10s %10s %10s %10s\n", "model", "lambda", "bpp", "cd_e3", "psnr_db");
  for (const auto& r : rows) {
    std::printf("%-10s %10.4g %10.4f %10.4f %10.3f\n", r.model.c_str(), r.lambda, r.bpp, r.cd_e3, r.psnr_db);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"cotpcc: learned point cloud compression trained as constrained optimal transport"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Build a normalized block dataset");
  std::string prep_out;
  std::vector<std::string> prep_inputs;
  std::vector<std::string> prep_families{"sphere", "box", "torus"};
  DatasetSpec spec;
  prepare->add_option("--out", prep_out, "Output dataset directory")->required();
  prepare->add_option("--input", prep_inputs, "Scene files (xyz/ply); synthetic shapes when omitted");
  prepare->add_option("--seed", spec.seed, "Random seed")->capture_default_str();
  prepare->add_option("--points", spec.points_per_block, "Points per block")->capture_default_str();
  prepare->add_option("--nonuniformity", spec.nonuniformity, "Non-uniform sampling strength in [0,1]")
      ->capture_default_str();
  prepare->add_option("--block-edge", spec.block_edge, "Block edge in scene units")->capture_default_str();
  prepare->add_option("--cube-edge", spec.cube_edge, "Scene cube edge")->capture_default_str();
  prepare->add_option("--families", prep_families, "Synthetic shape families")->delimiter(',');
  prepare->add_option("--clouds-per-family", spec.clouds_per_family, "Synthetic clouds per family")
      ->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train one model per lambda");
  TrainFlags train_flags;
  std::string train_dataset, train_out, train_resume;
  train_flags.add(train, true);
  train->add_option("--dataset", train_dataset, "Prepared dataset directory")->required();
  train->add_option("--out", train_out, "Run directory")->required();
  train->add_option("--checkpoint", train_resume, "Resume from this checkpoint");

  // compress
  auto* compress = app.add_subcommand("compress", "Compress a normalized cloud to a .cotp bitstream");
  std::string comp_ckpt, comp_in, comp_out;
  std::uint64_t comp_seed = 0;
  compress->add_option("--checkpoint", comp_ckpt, "Trained checkpoint")->required();
  compress->add_option("--input", comp_in, "Cloud file (xyz/ply) in [-1,1]^3")->required();
  compress->add_option("--out", comp_out, "Output .cotp file")->required();
  compress->add_option("--seed", comp_seed, "Sampler seed")->capture_default_str();

  // decompress
  auto* decompress = app.add_subcommand("decompress", "Decode a .cotp bitstream to a cloud file");
  std::string dec_ckpt, dec_in, dec_out;
  decompress->add_option("--checkpoint", dec_ckpt, "Trained checkpoint")->required();
  decompress->add_option("--input", dec_in, ".cotp file")->required();
  decompress->add_option("--out", dec_out, "Output cloud (.xyz or .ply)")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Metrics of a model on a dataset, or of one reconstruction");
  std::string ev_ckpt, ev_dataset, ev_out, ev_model = "model", ev_ref, ev_rec, ev_bs;
  evaluate->add_option("--checkpoint", ev_ckpt, "Trained checkpoint (dataset mode)");
  evaluate->add_option("--dataset", ev_dataset, "Prepared dataset directory (dataset mode)");
  evaluate->add_option("--out", ev_out, "RD CSV output (dataset mode)");
  evaluate->add_option("--model", ev_model, "Model name for the RD row")->capture_default_str();
  evaluate->add_option("--reference", ev_ref, "Reference cloud (file mode)");
  evaluate->add_option("--input", ev_rec, "Reconstructed cloud (file mode)");
  evaluate->add_option("--bitstream", ev_bs, ".cotp file supplying the rate (file mode)");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "FPS vs learned sampler under matched settings");
  TrainFlags ab_flags;
  std::string ab_dataset, ab_out;
  std::size_t ab_holdout = 4;
  ab_flags.add(ablate, false);
  ablate->add_option("--dataset", ab_dataset, "Prepared dataset directory")->required();
  ablate->add_option("--out", ab_out, "Output directory")->required();
  ablate->add_option("--holdout-stride", ab_holdout, "Every n-th cloud is held out for evaluation")
      ->capture_default_str();

  // rd-curve
  auto* rd = app.add_subcommand("rd-curve", "Train a lambda sweep into an RD CSV, or merge RD CSVs");
  TrainFlags rd_flags;
  rd_flags.lambdas = {0.01, 0.1, 1.0};
  std::string rd_dataset, rd_out, rd_model = "cotpcc";
  std::vector<std::string> rd_inputs;
  std::size_t rd_holdout = 4;
  rd_flags.add(rd, true);
  rd->add_option("--dataset", rd_dataset, "Prepared dataset directory (training mode)");
  rd->add_option("--input", rd_inputs, "RD CSV files to merge (merge mode)");
  rd->add_option("--out", rd_out, "Output directory (training mode) or CSV file (merge mode)")->required();
  rd->add_option("--model", rd_model, "Model name for the rows")->capture_default_str();
  rd->add_option("--holdout-stride", rd_holdout, "Every n-th cloud is held out for evaluation")
      ->capture_default_str();

  // plot
  auto* plot = app.add_subcommand("plot", "Render RD curves to SVG");
  std::string plot_in, plot_out;
  plot->add_option("--input", plot_in, "RD CSV")->required();
  plot->add_option("--out", plot_out, "Output .svg")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (prepare->parsed()) {
    if (prep_inputs.empty()) {
      spec.source = DatasetSpec::Source::kSynthetic;
      spec.families.clear();
      for (const auto& f : prep_families) spec.families.push_back(shape_family_from_string(f));
    } else {
      spec.source = DatasetSpec::Source::kFiles;
      spec.files.assign(prep_inputs.begin(), prep_inputs.end());
    }
    const auto clouds = build_dataset(spec);
    const auto manifest = write_dataset(prep_out, clouds, spec);
    std::printf("wrote %zu blocks to %s (digest %s)\n", clouds.size(), prep_out.c_str(),
                manifest.at("dataset_digest").get<std::string>().c_str());
  } else if (train->parsed()) {
    const auto data = dataset_or_die(train_dataset);
    FitOptions options;
    options.on_step = print_step;
    if (!train_resume.empty()) {
      auto state = checkpoint_or_die(train_resume);
      options.out_dir = train_out;
      const auto meta = fit(data, *state, options);
      std::printf("resumed to step %lld; checkpoint %s\n", static_cast<long long>(meta.step),
                  meta.path.string().c_str());
    } else {
      std::vector<double> lambdas = train_flags.lambdas;
      const TrainConfig config = train_flags.config();
      if (lambdas.size() == 1) {
        TrainState state(config);
        options.out_dir = train_out;
        const auto meta = fit(data, state, options);
        std::printf("trained %lld steps; checkpoint %s\n", static_cast<long long>(meta.step),
                    meta.path.string().c_str());
      } else {
        std::sort(lambdas.begin(), lambdas.end());
        options.out_dir = train_out;
        for (const auto& meta : sweep_lambda(data, config, lambdas, options)) {
          std::printf("lambda %g: %lld steps; checkpoint %s\n", meta.lambda, static_cast<long long>(meta.step),
                      meta.path.string().c_str());
        }
      }
    }
  } else if (compress->parsed()) {
    const auto state = checkpoint_or_die(comp_ckpt);
    const Points x = normalized_input(comp_in);
    const Bitstream bs = state->generator->compress(x, comp_seed);
    write_bitstream(comp_out, bs);
    const Points rec = state->generator->decompress(bs);
    const MetricReport r = evaluate_reconstruction(x, rec, &bs);
    std::printf("points %lld  payload_bits %llu  header_bits %llu  bpp %.17g  cd %.17g  psnr_db %.17g\n",
                static_cast<long long>(r.n_source_points), static_cast<unsigned long long>(r.payload_bits),
                static_cast<unsigned long long>(r.header_bits), r.bpp, r.cd, r.psnr_db);
  } else if (decompress->parsed()) {
    const auto state = checkpoint_or_die(dec_ckpt);
    const Bitstream bs = read_bitstream(dec_in);
    write_cloud(dec_out, PointCloud(state->generator->decompress(bs)));
    std::printf("decoded %u points to %s\n", bs.header.n, dec_out.c_str());
  } else if (evaluate->parsed()) {
    if (!ev_ref.empty() || !ev_rec.empty()) {
      if (ev_ref.empty() || ev_rec.empty()) throw InvalidArgument("file mode needs both --reference and --input");
      const PointCloud ref = load_cloud(ev_ref);
      const PointCloud rec = load_cloud(ev_rec);
      Bitstream bs;
      if (!ev_bs.empty()) bs = read_bitstream(ev_bs);
      const MetricReport r = evaluate_reconstruction(ref.points, rec.points, ev_bs.empty() ? nullptr : &bs);
      std::printf("cd,psnr_db,bpp,n_source_points,payload_bits,header_bits\n%.17g,%.17g,%.17g,%lld,%llu,%llu\n",
                  r.cd, r.psnr_db, r.bpp, static_cast<long long>(r.n_source_points),
                  static_cast<unsigned long long>(r.payload_bits), static_cast<unsigned long long>(r.header_bits));
    } else {
      if (ev_ckpt.empty() || ev_dataset.empty()) {
        throw InvalidArgument("evaluate needs --checkpoint and --dataset, or --reference and --input");
      }
      const auto state = checkpoint_or_die(ev_ckpt);
      const auto data = dataset_or_die(ev_dataset);
      const DatasetResult result = evaluate_dataset(*state->generator, data);
      const std::vector<RDRecord> rows{to_rd_record(ev_model, state->config.weights.lambda, result)};
      if (!ev_out.empty()) write_rd_csv(std::filesystem::path(ev_out), rows);
      print_rows(rows);
    }
  } else if (ablate->parsed()) {
    const auto data = dataset_or_die(ab_dataset);
    const auto [train_set, eval_set] = split_holdout(data, ab_holdout);
    const AblationResult result = run_ablation(train_set, eval_set, ab_flags.config(), ab_out);
    const std::vector<RDRecord> rows{result.fps, result.learned};
    std::filesystem::create_directories(ab_out);
    write_rd_csv(std::filesystem::path(ab_out) / "ablation.csv", rows);
    print_rows(rows);
    std::printf("learned sampler better on %d of 3 columns (bpp, cd, psnr)\n", result.learned_wins);
  } else if (rd->parsed()) {
    if (!rd_inputs.empty()) {
      std::vector<RDRecord> all;
      for (const auto& in : rd_inputs) {
        const auto rows = read_rd_csv(std::filesystem::path(in));
        all.insert(all.end(), rows.begin(), rows.end());
      }
      std::vector<RDRecord> sorted;
      for (const auto& curve : rd_curves(all)) sorted.insert(sorted.end(), curve.points.begin(), curve.points.end());
      write_rd_csv(std::filesystem::path(rd_out), sorted);
      print_rows(sorted);
    } else {
      if (rd_dataset.empty()) throw InvalidArgument("rd-curve needs --dataset (training mode) or --input (merge mode)");
      const auto data = dataset_or_die(rd_dataset);
      const auto [train_set, eval_set] = split_holdout(data, rd_holdout);
      std::vector<double> lambdas = rd_flags.lambdas;
      std::sort(lambdas.begin(), lambdas.end());
      const auto rows = run_rd_sweep(train_set, eval_set, rd_flags.config(), lambdas, rd_model, rd_out);
      std::filesystem::create_directories(rd_out);
      write_rd_csv(std::filesystem::path(rd_out) / "rd.csv", rows);
      print_rows(rows);
    }
  } else if (plot->parsed()) {
    write_rd_plot(plot_out, read_rd_csv(std::filesystem::path(plot_in)));
    std::printf("wrote %s\n", plot_out.c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cotpcc::DigestMismatch& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDigest;
  } catch (const cotpcc::DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDiverged;
  } catch (const cotpcc::DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  } catch (const cotpcc::InvalidArgument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
}
