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

#include "cotpcc/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cotpcc/errors.hpp"
#include "cotpcc/random.hpp"

namespace cotpcc {
namespace {

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// sigma(b) - sigma(a) for a <= b without cancellation in the tails.
inline double sigmoid_gap(double a, double b) {
  return a + b > 0.0 ? sigmoid(-a) - sigmoid(-b) : sigmoid(b) - sigmoid(a);
}

inline double sigmoid_slope(double z) { return sigmoid(z) * sigmoid(-z); }

struct MixtureView {
  const Matrix& means;
  const Matrix& log_scales;
  const Matrix& logits;

  // Softmax weights of channel c.
  void weights(Index c, std::vector<double>& pi) const {
    const Index k = means.cols();
    pi.resize(static_cast<std::size_t>(k));
    const double top = logits.row(c).maxCoeff();
    double total = 0.0;
    for (Index j = 0; j < k; ++j) {
      pi[static_cast<std::size_t>(j)] = std::exp(logits(c, j) - top);
      total += pi[static_cast<std::size_t>(j)];
    }
    for (double& p : pi) p /= total;
  }

  double bin_mass(Index c, double y, const std::vector<double>& pi) const {
    double p = 0.0;
    for (Index j = 0; j < means.cols(); ++j) {
      const double inv_s = std::exp(-log_scales(c, j));
      const double a = (y - 0.5 - means(c, j)) * inv_s;
      const double b = (y + 0.5 - means(c, j)) * inv_s;
      p += pi[static_cast<std::size_t>(j)] * sigmoid_gap(a, b);
    }
    return p;
  }
};

}  // namespace

void QuantizerConfig::validate() const {
  if (!(coord_step > 0.0) || !(feature_step > 0.0)) throw InvalidArgument("quantizer steps must be positive");
}

IntMatrix quantize(const Matrix& values, double step) {
  if (!(step > 0.0)) throw InvalidArgument("quantize: step must be positive");
  if (!values.allFinite()) throw InvalidArgument("quantize: non-finite value");
  IntMatrix q(values.rows(), values.cols());
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      const double r = std::nearbyint(values(i, j) / step);  // default rounding mode: ties to even
      if (std::abs(r) > static_cast<double>(std::numeric_limits<std::int32_t>::max())) {
        throw InvalidArgument("quantize: value out of range");
      }
      q(i, j) = static_cast<std::int32_t>(r);
    }
  }
  return q;
}

Matrix dequantize(const IntMatrix& q, double step) { return q.cast<double>() * step; }

Var noise_proxy(const Var& values, double step, std::uint64_t seed) {
  if (!(step > 0.0)) throw InvalidArgument("noise_proxy: step must be positive");
  Rng rng(seed);
  Matrix noise(values.rows(), values.cols());
  for (Index i = 0; i < noise.rows(); ++i) {
    for (Index j = 0; j < noise.cols(); ++j) noise(i, j) = (rng.uniform() - 0.5) * step;
  }
  return ad::add(values, ad::constant(std::move(noise)));
}

FactorizedModel::FactorizedModel(nn::ParamStore& store, const std::string& name, Index channels, const Init& init) {
  const Index k = init.components;
  Matrix means(channels, k);
  for (Index c = 0; c < channels; ++c) {
    for (Index j = 0; j < k; ++j) {
      const double t = k == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(k - 1);
      means(c, j) = init.center + t * init.spread;
    }
  }
  means_ = store.add(name + ".means", std::move(means));
  log_scales_ = store.add(name + ".log_scales", Matrix::Constant(channels, k, std::log(init.scale)));
  logits_ = store.add(name + ".logits", Matrix::Zero(channels, k));
}

Var FactorizedModel::bits(const Var& y) const {
  const Index rows = y.rows();
  const Index channels = y.cols();
  if (channels != this->channels()) {
    throw InvalidArgument("rate_estimate: channel mismatch (" + std::to_string(channels) + " vs model " +
                          std::to_string(this->channels()) + ")");
  }
  const MixtureView view{means_.value(), log_scales_.value(), logits_.value()};
  Matrix out(rows, channels);
  std::vector<double> pi;
  for (Index c = 0; c < channels; ++c) {
    view.weights(c, pi);
    for (Index i = 0; i < rows; ++i) {
      const double p = view.bin_mass(c, y.value()(i, c), pi);
      out(i, c) = -std::log2(std::max(p, kProbabilityFloor));
    }
  }
  const Var means = means_, log_scales = log_scales_, logits = logits_;
  return ad::make_op(
      std::move(out), {y, means_, log_scales_, logits_},
      [y, means, log_scales, logits](const Var& g, const Matrix&) -> std::vector<Var> {
        const MixtureView v{means.value(), log_scales.value(), logits.value()};
        const Index k = means.cols();
        Matrix dy = Matrix::Zero(y.rows(), y.cols());
        Matrix dmu = Matrix::Zero(means.rows(), k);
        Matrix dls = Matrix::Zero(means.rows(), k);
        Matrix dlogit = Matrix::Zero(means.rows(), k);
        std::vector<double> pi, gap(static_cast<std::size_t>(k)), slope_a(static_cast<std::size_t>(k)),
            slope_b(static_cast<std::size_t>(k)), za(static_cast<std::size_t>(k)), zb(static_cast<std::size_t>(k)),
            inv(static_cast<std::size_t>(k));
        for (Index c = 0; c < y.cols(); ++c) {
          v.weights(c, pi);
          for (Index i = 0; i < y.rows(); ++i) {
            const double yy = y.value()(i, c);
            double p = 0.0;
            for (Index j = 0; j < k; ++j) {
              const auto u = static_cast<std::size_t>(j);
              inv[u] = std::exp(-v.log_scales(c, j));
              za[u] = (yy - 0.5 - v.means(c, j)) * inv[u];
              zb[u] = (yy + 0.5 - v.means(c, j)) * inv[u];
              gap[u] = sigmoid_gap(za[u], zb[u]);
              slope_a[u] = sigmoid_slope(za[u]);
              slope_b[u] = sigmoid_slope(zb[u]);
              p += pi[u] * gap[u];
            }
            if (p < kProbabilityFloor) continue;  // floored: flat
            const double factor = -g.value()(i, c) / (p * std::log(2.0));
            for (Index j = 0; j < k; ++j) {
              const auto u = static_cast<std::size_t>(j);
              const double dp_dy = pi[u] * (slope_b[u] - slope_a[u]) * inv[u];
              dy(i, c) += factor * dp_dy;
              dmu(c, j) -= factor * dp_dy;
              dls(c, j) += factor * pi[u] * (slope_a[u] * za[u] - slope_b[u] * zb[u]);
              dlogit(c, j) += factor * pi[u] * (gap[u] - p);
            }
          }
        }
        return {ad::constant(std::move(dy)), ad::constant(std::move(dmu)), ad::constant(std::move(dls)),
                ad::constant(std::move(dlogit))};
      },
      "factorized_bits", /*twice_differentiable=*/false);
}

double FactorizedModel::probability(Index channel, double q) const {
  const MixtureView view{means_.value(), log_scales_.value(), logits_.value()};
  std::vector<double> pi;
  view.weights(channel, pi);
  return std::max(view.bin_mass(channel, q, pi), kProbabilityFloor);
}

double FactorizedModel::cdf(Index channel, double x) const {
  const MixtureView view{means_.value(), log_scales_.value(), logits_.value()};
  std::vector<double> pi;
  view.weights(channel, pi);
  double total = 0.0;
  for (Index j = 0; j < components(); ++j) {
    total += pi[static_cast<std::size_t>(j)] *
             sigmoid((x - view.means(channel, j)) * std::exp(-view.log_scales(channel, j)));
  }
  return total;
}

std::pair<std::int32_t, std::int32_t> FactorizedModel::support(Index channel, std::int32_t max_width) const {
  const Matrix& mu = means_.value();
  const Matrix& ls = log_scales_.value();
  std::vector<double> pi;
  MixtureView{mu, ls, logits_.value()}.weights(channel, pi);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double center = 0.0;
  for (Index j = 0; j < components(); ++j) {
    const double reach = 24.0 * std::exp(ls(channel, j));
    lo = std::min(lo, mu(channel, j) - reach);
    hi = std::max(hi, mu(channel, j) + reach);
    center += pi[static_cast<std::size_t>(j)] * mu(channel, j);
  }
  constexpr double kLimit = 1 << 28;
  lo = std::clamp(std::floor(lo), -kLimit, kLimit);
  hi = std::clamp(std::ceil(hi), -kLimit, kLimit);
  if (hi - lo + 1.0 > max_width) {
    const double c = std::clamp(std::round(center), -kLimit, kLimit);
    lo = c - std::floor(max_width / 2.0);
    hi = lo + max_width - 1;
  }
  return {static_cast<std::int32_t>(lo), static_cast<std::int32_t>(hi)};
}

Var rate_estimate(const Var& z, const FactorizedModel& model, double step) {
  if (!(step > 0.0)) throw InvalidArgument("rate_estimate: step must be positive");
  return ad::sum(model.bits(ad::scale(z, 1.0 / step)));
}

double fit_factorized_model(FactorizedModel& model, const std::vector<Var>& params, const Matrix& data,
                            int steps, double learning_rate, std::uint64_t seed) {
  nn::Adam adam(learning_rate);
  const Var x = ad::constant(data);
  const double count = static_cast<double>(data.rows() * data.cols());
  for (int s = 0; s < steps; ++s) {
    const Var y = noise_proxy(x, 1.0, derive_seed(seed, s));
    const Var loss = ad::scale(ad::sum(model.bits(y)), 1.0 / count);
    adam.step(params, ad::grad(loss, params));
  }
  ad::NoGradGuard guard;
  const Matrix rounded = data.unaryExpr([](double v) { return std::nearbyint(v); });
  return model.bits(ad::constant(rounded)).value().sum() / count;
}

CodingTable build_coding_table(const FactorizedModel& model, Index channel, std::int32_t lo, std::int32_t hi) {
  if (hi < lo) throw InvalidArgument("coding table: empty range");
  const auto symbols = static_cast<Index>(hi) - lo + 1;
  const Index slots = symbols + 1;
  constexpr std::int64_t kTotal = std::int64_t{1} << kCoderPrecision;
  if (slots > kTotal / 2) throw InvalidArgument("coding table: range too wide for 16-bit precision");

  std::vector<double> p(static_cast<std::size_t>(slots));
  double in_range = 0.0;
  for (Index s = 0; s < symbols; ++s) {
    p[static_cast<std::size_t>(s)] = model.probability(channel, static_cast<double>(lo + s));
    in_range += p[static_cast<std::size_t>(s)];
  }
  const double tail = 1.0 - (model.cdf(channel, hi + 0.5) - model.cdf(channel, lo - 0.5));
  p.back() = std::max(tail, kProbabilityFloor);
  double total = in_range + p.back();

  const std::int64_t spare = kTotal - slots;
  std::vector<std::int64_t> freq(static_cast<std::size_t>(slots));
  std::int64_t assigned = 0;
  Index argmax = 0;
  for (Index s = 0; s < slots; ++s) {
    const auto u = static_cast<std::size_t>(s);
    freq[u] = 1 + static_cast<std::int64_t>(std::floor(p[u] / total * static_cast<double>(spare)));
    assigned += freq[u];
    if (p[u] > p[static_cast<std::size_t>(argmax)]) argmax = s;
  }
  freq[static_cast<std::size_t>(argmax)] += kTotal - assigned;

  CodingTable table;
  table.lo = lo;
  table.hi = hi;
  table.cdf.resize(static_cast<std::size_t>(slots) + 1);
  table.cdf[0] = 0;
  for (Index s = 0; s < slots; ++s) {
    table.cdf[static_cast<std::size_t>(s) + 1] =
        table.cdf[static_cast<std::size_t>(s)] + static_cast<std::uint32_t>(freq[static_cast<std::size_t>(s)]);
  }
  return table;
}

}  // namespace cotpcc
