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

#ifndef COTPCC_KNN_HPP_
#define COTPCC_KNN_HPP_

#include <utility>
#include <vector>

#include "cotpcc/cloud.hpp"

namespace cotpcc {

// Exact nearest-neighbour queries over a fixed point set. Ties between equal
// distances resolve to the lower index, so results are deterministic.
class KdTree {
 public:
  explicit KdTree(const Points& points);

  // Index and squared distance of the closest point.
  std::pair<Index, double> nearest(const Vec3& query) const;
  // k closest points ordered by (squared distance, index).
  std::vector<Index> knn(const Vec3& query, Index k) const;

  Index size() const { return static_cast<Index>(points_.rows()); }

 private:
  struct Node {
    Index begin = 0;
    Index end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(Index begin, Index end);

  Points points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

// Row-major n x k neighbour table of `points` (each row starts with the point
// itself when k >= 1, as it is its own nearest neighbour).
std::vector<Index> knn_graph(const Points& points, Index k);

// For each query point, k nearest among `reference` (row-major table).
std::vector<Index> knn_query(const Points& queries, const Points& reference, Index k);

struct NearestResult {
  std::vector<Index> index;
  std::vector<double> sq_dist;
};

NearestResult nearest_neighbors(const Points& queries, const Points& reference);

}  // namespace cotpcc

#endif  // COTPCC_KNN_HPP_
