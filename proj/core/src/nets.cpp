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

#include "cotpcc/nets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include "cotpcc/errors.hpp"
#include "cotpcc/knn.hpp"

namespace cotpcc {

using ad::constant;
using ad::leaky_relu;

const char* to_string(SamplerKind kind) { return kind == SamplerKind::kFps ? "fps" : "learned"; }

SamplerKind sampler_kind_from_string(const std::string& name) {
  if (name == "learned" || name == "sampler") return SamplerKind::kLearned;
  if (name == "fps") return SamplerKind::kFps;
  throw InvalidArgument("unknown sampler '" + name + "' (expected learned|fps)");
}

Index stage_size(Index n, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("ratio must lie in (0, 1]");
  const double exact = static_cast<double>(n) * ratio;
  const auto m = static_cast<Index>(std::ceil(exact - 1e-6 * static_cast<double>(std::max<Index>(n, 1))));
  return std::clamp<Index>(m, 1, n);
}

Index expansion_factor(double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("ratio must lie in (0, 1]");
  return std::max<Index>(1, static_cast<Index>(std::ceil(1.0 / ratio - 1e-6)));
}

Index latent_size(Index n, const Ratios& ratios) {
  Index m = n;
  for (double r : ratios) m = stage_size(m, r);
  return m;
}

// ---------------------------------------------------------------------------
// Sampler

namespace {

// Vector attention over neighbour groups:
//   pre_ij = q_i - k_t(ij) + delta_ij,  a_ij = pre_ij W + b,
//   w_ij = softmax_j(a_ij) per channel,  out_i = sum_j w_ij * (v_t(ij) + delta_ij).
// One fused op keeps only pre and w alive for the backward pass.
Var vector_attention(const Var& q, const Var& key, const Var& v, const Var& delta, const nn::Linear& att,
                     const std::shared_ptr<const std::vector<Index>>& table, Index k) {
  const Index n = q.rows();
  const Index d = q.cols();
  const std::vector<Index>& t = *table;
  auto pre = std::make_shared<Matrix>(n * k, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) {
      const Index r = i * k + j;
      pre->row(r) = q.value().row(i) - key.value().row(t[static_cast<std::size_t>(r)]) + delta.value().row(r);
    }
  }
  auto w = std::make_shared<Matrix>((*pre) * att.weight.value());
  w->rowwise() += att.bias.value().row(0);
  Matrix out = Matrix::Zero(n, d);
  for (Index i = 0; i < n; ++i) {
    auto group = w->middleRows(i * k, k);
    const Eigen::RowVectorXd top = group.colwise().maxCoeff();
    group.rowwise() -= top;
    group = group.array().exp().matrix();
    const Eigen::RowVectorXd total = group.colwise().sum();
    for (Index j = 0; j < k; ++j) {
      group.row(j).array() /= total.array();
      const Index r = i * k + j;
      out.row(i).array() +=
          group.row(j).array() * (v.value().row(t[static_cast<std::size_t>(r)]) + delta.value().row(r)).array();
    }
  }
  return ad::make_op(
      std::move(out), {q, key, v, delta, att.weight, att.bias},
      [q, key, v, delta, att, table, k, pre, w](const Var& g, const Matrix&) -> std::vector<Var> {
        const Index n = q.rows();
        const Index d = q.cols();
        const std::vector<Index>& t = *table;
        const Matrix& G = g.value();
        Matrix dq = Matrix::Zero(n, d), dkey = Matrix::Zero(key.rows(), d), dv = Matrix::Zero(v.rows(), d);
        Matrix ddelta(n * k, d), da(n * k, d);
        for (Index i = 0; i < n; ++i) {
          Eigen::RowVectorXd inner = Eigen::RowVectorXd::Zero(d);
          for (Index j = 0; j < k; ++j) {
            const Index r = i * k + j;
            const auto src = t[static_cast<std::size_t>(r)];
            const Eigen::RowVectorXd gu = w->row(r).cwiseProduct(G.row(i));
            dv.row(src) += gu;
            ddelta.row(r) = gu;
            da.row(r) = G.row(i).cwiseProduct(v.value().row(src) + delta.value().row(r));
            inner += w->row(r).cwiseProduct(da.row(r));
          }
          for (Index j = 0; j < k; ++j) {
            const Index r = i * k + j;
            da.row(r) = w->row(r).cwiseProduct(da.row(r) - inner);
          }
        }
        Matrix dweight = pre->transpose() * da;
        Matrix dbias = da.colwise().sum();
        const Matrix dpre = da * att.weight.value().transpose();
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < k; ++j) {
            const Index r = i * k + j;
            dq.row(i) += dpre.row(r);
            dkey.row(t[static_cast<std::size_t>(r)]) -= dpre.row(r);
          }
        }
        ddelta += dpre;
        return {ad::constant(std::move(dq)),      ad::constant(std::move(dkey)),    ad::constant(std::move(dv)),
                ad::constant(std::move(ddelta)),  ad::constant(std::move(dweight)), ad::constant(std::move(dbias))};
      },
      "vector_attention", /*twice_differentiable=*/false);
}

}  // namespace

Sampler::Sampler(nn::ParamStore& store, const NetConfig& config, Rng& rng) : config_(config) {
  const Index d = config.transformer_dim;
  lift_ = nn::Linear::create(store, "lift", 3, config.lift_dim, rng);
  query_ = nn::Linear::create(store, "pt.query", config.lift_dim, d, rng);
  key_ = nn::Linear::create(store, "pt.key", config.lift_dim, d, rng);
  value_ = nn::Linear::create(store, "pt.value", config.lift_dim, d, rng);
  position_ = nn::Linear::create(store, "pt.position", 3, d, rng);
  attention_ = nn::Linear::create(store, "pt.attention", d, d, rng);
  residual_ = nn::Linear::create(store, "pt.residual", config.lift_dim, d, rng);
  Index in = d;
  for (std::size_t l = 0; l < edge_.size(); ++l) {
    edge_[l] = nn::Linear::create(store, "edgeconv" + std::to_string(l), 2 * in, config.edge_dims[l], rng);
    in = config.edge_dims[l];
  }
}

Var Sampler::trunk(const Points& points, const std::vector<Index>& knn_table) const {
  const Index n = points.rows();
  const Index k = config_.knn;
  if (static_cast<Index>(knn_table.size()) != n * k) throw InvalidArgument("sampler: neighbour table size");
  Matrix rel(n * k, 3);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) {
      rel.row(i * k + j) = points.row(knn_table[static_cast<std::size_t>(i * k + j)]) - points.row(i);
    }
  }
  const double slope = config_.leaky_slope;
  const Var x = leaky_relu(lift_(constant(Matrix(points))), slope);
  const Var q = query_(x);
  const Var kk = key_(x);
  const Var v = value_(x);
  const Var delta = position_(constant(std::move(rel)));
  const auto table = std::make_shared<const std::vector<Index>>(knn_table);
  const Var agg = vector_attention(q, kk, v, delta, attention_, table, k);
  return leaky_relu(ad::add(agg, residual_(x)), slope);
}

Matrix Sampler::significance(const Matrix& trunk_features, const std::vector<Index>& knn_table) const {
  using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Index n = trunk_features.rows();
  const Index k = config_.knn;
  const auto slope = static_cast<float>(config_.leaky_slope);
  MatF x = trunk_features.cast<float>();
  for (const auto& layer : edge_) {
    // EdgeConv on [x_i, x_j - x_i] with a monotone activation followed by a
    // max over j factors into act(A_i + max_j B_j).
    const Index in = x.cols();
    const MatF w = layer.weight.value().cast<float>();
    const MatF w_center = w.topRows(in) - w.bottomRows(in);
    const MatF w_edge = w.bottomRows(in);
    MatF a = x * w_center;
    a.rowwise() += layer.bias.value().row(0).cast<float>();
    const MatF b = x * w_edge;
    const Index out = w.cols();
    MatF next(n, out);
    for (Index i = 0; i < n; ++i) {
      auto best = b.row(knn_table[static_cast<std::size_t>(i * k)]).eval();
      for (Index j = 1; j < k; ++j) best = best.cwiseMax(b.row(knn_table[static_cast<std::size_t>(i * k + j)]));
      auto row = (a.row(i) + best).eval();
      next.row(i) = row.unaryExpr([slope](float z) { return z > 0.0f ? z : slope * z; });
    }
    x = std::move(next);
  }
  return x.cast<double>();
}

Matrix Sampler::features(const Points& points) const {
  if (points.rows() < config_.knn) throw InvalidArgument("sampler: fewer points than k_nn");
  const auto table = knn_graph(points, config_.knn);
  ad::NoGradGuard guard;
  return significance(trunk(points, table).value(), table);
}

// ---------------------------------------------------------------------------
// Significance selection

namespace {

using MatColF = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

// Rows of each column ordered by (value desc, index asc), truncated to k.
void top_k_column(const double* col, Index n, Index k, std::vector<Index>& scratch, std::vector<Index>& out) {
  if (k <= 8) {
    // Ascending scan: a later row only displaces on a strictly larger value.
    out.clear();
    for (Index i = 0; i < n; ++i) {
      if (static_cast<Index>(out.size()) == k && !(col[i] > col[out.back()])) continue;
      auto pos = out.end();
      while (pos != out.begin() && col[i] > col[*(pos - 1)]) --pos;
      out.insert(pos, i);
      if (static_cast<Index>(out.size()) > k) out.pop_back();
    }
    return;
  }
  scratch.resize(static_cast<std::size_t>(n));
  std::iota(scratch.begin(), scratch.end(), Index{0});
  auto better = [col](Index a, Index b) { return col[a] > col[b] || (col[a] == col[b] && a < b); };
  std::partial_sort(scratch.begin(), scratch.begin() + k, scratch.end(), better);
  out.assign(scratch.begin(), scratch.begin() + k);
}

}  // namespace

std::vector<Index> significance_select(const Matrix& features, double ratio, std::uint64_t seed) {
  const Index n = features.rows();
  const Index channels = features.cols();
  if (n == 0 || channels == 0) throw InvalidArgument("significance_select: empty feature matrix");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("significance_select: ratio must lie in (0, 1]");
  const Index quota = stage_size(n, ratio);
  if (quota > n) throw InvalidArgument("significance_select: ceil(n r) exceeds n");

  const MatColF cols = features;  // column-major copy for per-column scans

  // Best (rank, column) per row over the per-column orderings seen so far.
  constexpr Index kUnseen = std::numeric_limits<Index>::max();
  auto collect = [&](Index k, std::vector<std::pair<Index, Index>>& best) {
    best.assign(static_cast<std::size_t>(n), {kUnseen, kUnseen});
    std::vector<Index> scratch, top;
    for (Index c = 0; c < channels; ++c) {
      if (k == 1) {
        Index arg = 0;
        const double* col = cols.col(c).data();
        for (Index i = 1; i < n; ++i) {
          if (col[i] > col[arg]) arg = i;
        }
        top.assign(1, arg);
      } else {
        top_k_column(cols.col(c).data(), n, k, scratch, top);
      }
      for (Index r = 0; r < static_cast<Index>(top.size()); ++r) {
        auto& slot = best[static_cast<std::size_t>(top[static_cast<std::size_t>(r)])];
        slot = std::min(slot, std::pair<Index, Index>{r, c});
      }
    }
  };
  auto canonical = [&](const std::vector<std::pair<Index, Index>>& best, bool rank0_only) {
    std::vector<Index> rows;
    for (Index i = 0; i < n; ++i) {
      const auto& b = best[static_cast<std::size_t>(i)];
      if (b.first == kUnseen) continue;
      if (rank0_only && b.first != 0) continue;
      rows.push_back(i);
    }
    std::sort(rows.begin(), rows.end(),
              [&](Index a, Index b) { return best[static_cast<std::size_t>(a)] < best[static_cast<std::size_t>(b)]; });
    return rows;
  };

  std::vector<std::pair<Index, Index>> best;
  collect(1, best);
  std::vector<Index> s1 = canonical(best, true);
  Rng rng(seed);
  std::vector<Index> chosen;
  if (static_cast<Index>(s1.size()) >= quota) {
    rng.shuffle(std::span<Index>(s1));
    chosen.assign(s1.begin(), s1.begin() + quota);
  } else {
    const auto s1_size = static_cast<Index>(s1.size());
    Index k = (quota + s1_size - 1) / s1_size;
    std::vector<Index> pool;
    while (true) {
      collect(std::min(k, n), best);
      pool = canonical(best, false);
      if (static_cast<Index>(pool.size()) >= quota || k >= n) break;
      k = std::min(n, 2 * k);
    }
    std::vector<Index> extra;
    for (Index row : pool) {
      if (best[static_cast<std::size_t>(row)].first != 0) extra.push_back(row);
    }
    rng.shuffle(std::span<Index>(extra));
    chosen = s1;
    chosen.insert(chosen.end(), extra.begin(), extra.begin() + (quota - s1_size));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// ---------------------------------------------------------------------------
// Encoder

Encoder::Encoder(nn::ParamStore& sampler_store, nn::ParamStore& encoder_store, const NetConfig& config, Rng& rng)
    : config_(config), sampler_(sampler_store, config, rng) {
  Index feat = 0;
  for (std::size_t s = 0; s < aggregate_.size(); ++s) {
    aggregate_[s] = nn::Linear::create(encoder_store, "stage" + std::to_string(s) + ".aggregate",
                                       config.transformer_dim + feat + 3, config.stage_dim, rng);
    feat = config.stage_dim;
  }
  project_ = nn::Linear::create(encoder_store, "project", config.stage_dim, config.latent_dim, rng);
}

EncoderOutput Encoder::forward(const Points& cloud, const Ratios& ratios, SamplerKind kind, std::uint64_t seed,
                               const StageSelection* selection) const {
  const Index k = config_.knn;
  EncoderOutput out;
  out.ratios = ratios;
  Points pts = cloud;
  Var feats;
  for (std::size_t s = 0; s < 3; ++s) {
    const Index n_in = pts.rows();
    if (n_in < k) {
      throw InvalidArgument("encoder: stage " + std::to_string(s + 1) + " input has " + std::to_string(n_in) +
                            " points, fewer than k_nn = " + std::to_string(k));
    }
    const auto table = knn_graph(pts, k);
    const Var h = sampler_.trunk(pts, table);
    const Index quota = stage_size(n_in, ratios[s]);
    std::vector<Index> idx;
    if (selection != nullptr) {
      idx = (*selection)[s];
      if (static_cast<Index>(idx.size()) != quota) throw InvalidArgument("encoder: stored selection has wrong size");
    } else if (kind == SamplerKind::kLearned) {
      idx = significance_select(sampler_.significance(h.value(), table), ratios[s], derive_seed(seed, s));
    } else {
      idx = fps(pts, quota, 0);
    }

    std::vector<Index> nbr(static_cast<std::size_t>(quota * k));
    Matrix offsets(quota * k, 3);
    for (Index c = 0; c < quota; ++c) {
      const Index center = idx[static_cast<std::size_t>(c)];
      for (Index j = 0; j < k; ++j) {
        const Index nb = table[static_cast<std::size_t>(center * k + j)];
        nbr[static_cast<std::size_t>(c * k + j)] = nb;
        offsets.row(c * k + j) = pts.row(nb) - pts.row(center);
      }
    }
    const Var source = feats.defined() ? ad::concat_cols(std::vector<Var>{h, feats}) : h;
    // Linear([source_j, offset]) evaluated as gather(source W_s) + offset W_o + b.
    const nn::Linear& agg = aggregate_[s];
    const Index src_dim = source.cols();
    const Var projected = ad::gather_rows(ad::matmul(source, ad::slice_rows(agg.weight, 0, src_dim)), nbr);
    const Var geometric = ad::matmul(constant(std::move(offsets)), ad::slice_rows(agg.weight, src_dim, 3));
    const Var edge = ad::add_row(ad::add(projected, geometric), agg.bias);
    feats = ad::group_max(leaky_relu(edge, config_.leaky_slope), k);

    Points next(quota, 3);
    for (Index c = 0; c < quota; ++c) next.row(c) = pts.row(idx[static_cast<std::size_t>(c)]);
    out.stage_indices[s] = std::move(idx);
    out.stage_points[s] = next;
    pts = std::move(next);
  }
  out.p3 = constant(Matrix(pts));
  out.f3 = project_(feats);
  return out;
}

// ---------------------------------------------------------------------------
// Decoder

Decoder::Decoder(nn::ParamStore& store, const NetConfig& config, Rng& rng) : config_(config) {
  const Index d = config.decoder_dim;
  const Index u = config.max_expansion;
  input_ = nn::Linear::create(store, "input", config.latent_dim + 3, d, rng);
  for (std::size_t s = 0; s < 3; ++s) {
    const std::string prefix = "stage" + std::to_string(s);
    offset_[s] = nn::Linear::create(store, prefix + ".offset", d, 3 * u, rng);
    child_[s] = nn::Linear::create(store, prefix + ".child", d, d * u, rng);
    offset_embed_[s] = nn::Linear::create(store, prefix + ".offset_embed", 3, d, rng);
  }
  refine_ = nn::Linear::create(store, "refine", d, 3, rng);
}

Var Decoder::forward(const Var& p3, const Var& f3, const Ratios& ratios, Index n_out) const {
  if (p3.cols() != 3 || f3.rows() != p3.rows() || f3.cols() != config_.latent_dim) {
    throw InvalidArgument("decoder: malformed latent");
  }
  if (n_out < 1) throw InvalidArgument("decoder: output size must be positive");
  const Index d = config_.decoder_dim;
  const double slope = config_.leaky_slope;
  Var h = leaky_relu(input_(ad::concat_cols(std::vector<Var>{f3, p3})), slope);
  Var p = p3;
  for (std::size_t s = 0; s < 3; ++s) {
    const Index u = expansion_factor(ratios[2 - s]);
    if (u > config_.max_expansion) throw InvalidArgument("decoder: ratio below 1/max_expansion");
    const Index m = p.rows();
    Var off = ad::scale(ad::tanh(ad::slice_cols(offset_[s](h), 0, 3 * u)), config_.offset_scales[s]);
    off = ad::reshape(off, m * u, 3);
    p = ad::add(ad::repeat_rows(p, u), off);
    const Var children = ad::reshape(ad::slice_cols(child_[s](h), 0, d * u), m * u, d);
    h = leaky_relu(ad::add(children, offset_embed_[s](off)), slope);
  }
  p = ad::add(p, ad::scale(ad::tanh(refine_(h)), config_.refine_scale));
  const Index count = p.rows();
  if (count > n_out) {
    p = ad::slice_rows(p, 0, n_out);
  } else if (count < n_out) {
    std::vector<Index> idx(static_cast<std::size_t>(n_out));
    for (Index i = 0; i < n_out; ++i) idx[static_cast<std::size_t>(i)] = i < count ? i : (i - count) % count;
    p = ad::gather_rows(p, idx);
  }
  return ad::clamp(p, -config_.output_clamp, config_.output_clamp);
}

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(nn::ParamStore& store, const NetConfig& config, Rng& rng, bool zero_head)
    : config_(config) {
  const Index d = config.disc_dim;
  input_ = nn::Linear::create(store, "input", 3, d, rng);
  for (Index b = 0; b < config.disc_blocks; ++b) {
    const std::string prefix = "block" + std::to_string(b);
    blocks_.emplace_back(nn::Linear::create(store, prefix + ".conv1", d, d, rng),
                         nn::Linear::create(store, prefix + ".conv2", d, d, rng));
  }
  head_hidden_ = nn::Linear::create(store, "head.hidden", 2 * d, d, rng);
  head_out_ = nn::Linear::create(store, "head.out", d, 1, rng);
  if (zero_head) {
    head_out_.weight.mutable_value().setZero();
    head_out_.bias.mutable_value().setZero();
  }
}

Var Discriminator::forward(const Var& points) const {
  if (points.rows() == 0) throw InvalidArgument("discriminator: empty cloud");
  const double slope = config_.leaky_slope;
  Var h = leaky_relu(input_(points), slope);
  for (const auto& [conv1, conv2] : blocks_) h = ad::add(h, conv2(leaky_relu(conv1(h), slope)));
  h = leaky_relu(h, slope);
  const Var pooled = ad::concat_cols(std::vector<Var>{ad::col_max(h), ad::col_mean(h)});
  // Bounded score: an unbounded J lets beta*d_wass outgrow the gamma-weighted
  // anchor without limit. Centred so a zero head still scores exactly 0.
  return ad::add_scalar(ad::sigmoid(head_out_(leaky_relu(head_hidden_(pooled), slope))), -0.5);
}

double Discriminator::score(const Points& points) const {
  ad::NoGradGuard guard;
  return forward(constant(Matrix(points))).item();
}

}  // namespace cotpcc
