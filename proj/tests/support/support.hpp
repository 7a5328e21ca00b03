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


#ifndef COTPCC_TESTS_SUPPORT_HPP_
#define COTPCC_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cotpcc/autodiff.hpp"
#include "cotpcc/cloud.hpp"
#include "cotpcc/random.hpp"

namespace cotpcc::testing {

inline Points random_points(Index n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Points p(n, 3);
  for (Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) p(i, c) = rng.uniform(lo, hi);
  }
  return p;
}

// O(N^2) reference for the symmetric Chamfer distance.
inline double brute_chamfer(const Points& a, const Points& b) {
  auto directed = [](const Points& from, const Points& to) {
    double total = 0.0;
    for (Index i = 0; i < from.rows(); ++i) {
      double best = INFINITY;
      for (Index j = 0; j < to.rows(); ++j) best = std::min(best, (from.row(i) - to.row(j)).squaredNorm());
      total += best;
    }
    return total / static_cast<double>(from.rows());
  };
  return directed(a, b) + directed(b, a);
}

// Greedy farthest-point re-simulation with lowest-index ties.
inline std::vector<Index> brute_fps(const Points& p, Index m, Index start) {
  std::vector<Index> out{start};
  std::vector<double> d(static_cast<std::size_t>(p.rows()), INFINITY);
  std::vector<bool> used(static_cast<std::size_t>(p.rows()), false);
  used[static_cast<std::size_t>(start)] = true;
  while (static_cast<Index>(out.size()) < m) {
    const Index last = out.back();
    Index best = -1;
    double best_d = -1.0;
    for (Index i = 0; i < p.rows(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      d[k] = std::min(d[k], (p.row(i) - p.row(last)).squaredNorm());
      if (!used[k] && d[k] > best_d) {
        best_d = d[k];
        best = i;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    out.push_back(best);
  }
  return out;
}

struct FdStats {
  int probed = 0;
  int passed = 0;
  double worst = 0.0;
  double fraction() const { return probed == 0 ? 0.0 : static_cast<double>(passed) / probed; }
};

// Checks one flat entry of param against a five-point central stencil
// (O(h^4) truncation). err = |a - n| / max(|a|, |n|, floor).
inline FdStats finite_difference_entry(ad::Var param, const std::function<double()>& loss,
                                       const ad::Matrix& analytic, Index flat, double h, double tol,
                                       double floor = 1e-8) {
  double& slot = param.mutable_value().data()[flat];
  const double keep = slot;
  auto at = [&](double x) {
    slot = x;
    return loss();
  };
  const double numeric = (8.0 * (at(keep + h) - at(keep - h)) - (at(keep + 2 * h) - at(keep - 2 * h))) / (12.0 * h);
  slot = keep;
  const double a = analytic.data()[flat];
  FdStats stats;
  stats.probed = 1;
  stats.worst = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
  stats.passed = stats.worst <= tol ? 1 : 0;
  return stats;
}

// Probes random entries, or sweeps all of them when probes >= size.
inline FdStats finite_difference_check(ad::Var param, const std::function<double()>& loss, const ad::Matrix& analytic,
                                       int probes, std::uint64_t seed, double h, double tol,
                                       double floor = 1e-8) {
  Rng rng(seed);
  FdStats stats;
  const auto size = static_cast<std::uint64_t>(param.value().size());
  const bool sweep = static_cast<std::uint64_t>(probes) >= size;
  const int count = sweep ? static_cast<int>(size) : probes;
  for (int p = 0; p < count; ++p) {
    const auto flat = sweep ? static_cast<Index>(p) : static_cast<Index>(rng.below(size));
    const FdStats one = finite_difference_entry(param, loss, analytic, flat, h, tol, floor);
    stats.worst = std::max(stats.worst, one.worst);
    ++stats.probed;
    stats.passed += one.passed;
  }
  return stats;
}

// Probes `count` scalars drawn uniformly over all entries of `params`.
inline FdStats probe_parameters(const std::vector<ad::Var>& params, const std::vector<ad::Var>& grads,
                                const std::function<double()>& loss, int count, std::uint64_t seed, double h,
                                double tol, double floor = 1e-8) {
  std::vector<std::uint64_t> ends;
  std::uint64_t size = 0;
  for (const auto& p : params) ends.push_back(size += static_cast<std::uint64_t>(p.value().size()));
  FdStats total;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t flat = rng.below(size);
    const auto p = static_cast<std::size_t>(std::upper_bound(ends.begin(), ends.end(), flat) - ends.begin());
    const auto offset = static_cast<Index>(flat - (p == 0 ? 0 : ends[p - 1]));
    const FdStats one = finite_difference_entry(params[p], loss, grads[p].value(), offset, h, tol, floor);
    ++total.probed;
    total.passed += one.passed;
    total.worst = std::max(total.worst, one.worst);
  }
  return total;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cotpcc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cotpcc::testing

#endif  // COTPCC_TESTS_SUPPORT_HPP_
