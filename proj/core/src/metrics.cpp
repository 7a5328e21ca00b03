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

#include "cotpcc/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "cotpcc/errors.hpp"
#include "cotpcc/knn.hpp"

namespace cotpcc {
namespace {

double directed_mean(const Points& from, const Points& to) {
  const NearestResult nn = nearest_neighbors(from, to);
  double total = 0.0;
  for (Index i = 0; i < from.rows(); ++i) {
    total += (from.row(i) - to.row(nn.index[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return total / static_cast<double>(from.rows());
}

}  // namespace

double chamfer_l2(const Points& a, const Points& b) {
  if (a.rows() == 0 || b.rows() == 0) throw InvalidArgument("chamfer_l2: empty cloud");
  return directed_mean(a, b) + directed_mean(b, a);
}

NormalEstimate estimate_normals(const Points& points, Index k) {
  const Index n = points.rows();
  if (k < 3) throw InvalidArgument("estimate_normals: k must be >= 3");
  if (k >= n) throw InvalidArgument("estimate_normals: k must be smaller than the number of points");
  const auto table = knn_graph(points, k);
  NormalEstimate out;
  out.normals.resize(n, 3);
  out.degenerate.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    Vec3 mean = Vec3::Zero();
    for (Index j = 0; j < k; ++j) mean += points.row(table[static_cast<std::size_t>(i * k + j)]).transpose();
    mean /= static_cast<double>(k);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (Index j = 0; j < k; ++j) {
      const Vec3 d = points.row(table[static_cast<std::size_t>(i * k + j)]).transpose() - mean;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Vec3 evals = solver.eigenvalues();  // ascending
    const double top = evals[2];
    if (!(top > 0.0) || evals[1] <= 1e-12 * top) {
      out.normals.row(i) = Vec3::UnitZ().transpose();
      out.degenerate[static_cast<std::size_t>(i)] = 1;
      continue;
    }
    out.normals.row(i) = solver.eigenvectors().col(0).normalized().transpose();
  }
  return out;
}

double psnr_point_to_plane(const Points& ref, const Points& rec, Index k) {
  if (ref.rows() == 0 || rec.rows() == 0) throw InvalidArgument("psnr_point_to_plane: empty cloud");
  const Index nk = std::min<Index>(k, ref.rows() - 1);
  if (nk < 3) throw InvalidArgument("psnr_point_to_plane: reference needs at least 4 points");
  const Points normals = estimate_normals(ref, nk).normals;

  const NearestResult fwd = nearest_neighbors(ref, rec);
  double mse_fwd = 0.0;
  for (Index i = 0; i < ref.rows(); ++i) {
    const double e = (ref.row(i) - rec.row(fwd.index[static_cast<std::size_t>(i)])).dot(normals.row(i));
    mse_fwd += e * e;
  }
  mse_fwd /= static_cast<double>(ref.rows());

  const NearestResult bwd = nearest_neighbors(rec, ref);
  double mse_bwd = 0.0;
  for (Index j = 0; j < rec.rows(); ++j) {
    const Index p = bwd.index[static_cast<std::size_t>(j)];
    const double e = (rec.row(j) - ref.row(p)).dot(normals.row(p));
    mse_bwd += e * e;
  }
  mse_bwd /= static_cast<double>(rec.rows());

  const double mse = 0.5 * (mse_fwd + mse_bwd);
  const double peak_sq = (ref.colwise().maxCoeff() - ref.colwise().minCoeff()).squaredNorm();
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak_sq / mse));
}

double bpp_from_bits(std::uint64_t payload_bits, Index n_source_points) {
  if (n_source_points < 1) throw InvalidArgument("bpp: n_source_points must be >= 1");
  return static_cast<double>(payload_bits) / static_cast<double>(n_source_points);
}

}  // namespace cotpcc
