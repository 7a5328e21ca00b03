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

#include "cotpcc/knn.hpp"

#include <algorithm>
#include <limits>
#include <queue>

#include "cotpcc/errors.hpp"

namespace cotpcc {
namespace {

constexpr Index kLeafSize = 12;

struct Candidate {
  double sq_dist;
  Index index;
  bool operator<(const Candidate& other) const {
    return sq_dist < other.sq_dist || (sq_dist == other.sq_dist && index < other.index);
  }
};

}  // namespace

KdTree::KdTree(const Points& points) : points_(points), order_(static_cast<std::size_t>(points.rows())) {
  if (points.rows() == 0) throw InvalidArgument("KdTree: empty point set");
  for (Index i = 0; i < points.rows(); ++i) order_[static_cast<std::size_t>(i)] = i;
  nodes_.reserve(static_cast<std::size_t>(2 * points.rows() / kLeafSize + 2));
  build(0, points.rows());
}

int KdTree::build(Index begin, Index end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (Index i = begin; i < end; ++i) {
    const Vec3 p = points_.row(order_[static_cast<std::size_t>(i)]).transpose();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const Index mid = begin + (end - begin) / 2;
  auto first = order_.begin() + begin;
  std::nth_element(first, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
    const double va = points_(a, axis), vb = points_(b, axis);
    return va < vb || (va == vb && a < b);
  });
  const double split = points_(order_[static_cast<std::size_t>(mid)], axis);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[static_cast<std::size_t>(id)].axis = axis;
  nodes_[static_cast<std::size_t>(id)].split = split;
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

std::pair<Index, double> KdTree::nearest(const Vec3& query) const {
  const auto result = knn(query, 1);
  const Index idx = result.front();
  return {idx, (points_.row(idx).transpose() - query).squaredNorm()};
}

std::vector<Index> KdTree::knn(const Vec3& query, Index k) const {
  if (k <= 0) return {};
  k = std::min(k, size());
  std::priority_queue<Candidate> heap;  // max-heap: worst candidate on top
  std::vector<std::pair<int, double>> stack{{0, 0.0}};
  while (!stack.empty()) {
    auto [id, bound] = stack.back();
    stack.pop_back();
    if (static_cast<Index>(heap.size()) == k && bound > heap.top().sq_dist) continue;
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        const Index idx = order_[static_cast<std::size_t>(i)];
        const Candidate c{(points_.row(idx).transpose() - query).squaredNorm(), idx};
        if (static_cast<Index>(heap.size()) < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const double plane = diff * diff;
    // Points equal to the split value may sit on either side.
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(bound, plane));
    stack.emplace_back(near, bound);
  }
  std::vector<Candidate> sorted;
  sorted.reserve(heap.size());
  while (!heap.empty()) {
    sorted.push_back(heap.top());
    heap.pop();
  }
  std::vector<Index> out(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) out[i] = sorted[sorted.size() - 1 - i].index;
  return out;
}

std::vector<Index> knn_query(const Points& queries, const Points& reference, Index k) {
  if (k > reference.rows()) throw InvalidArgument("knn_query: k exceeds reference size");
  const KdTree tree(reference);
  std::vector<Index> table(static_cast<std::size_t>(queries.rows() * k));
  for (Index i = 0; i < queries.rows(); ++i) {
    const auto nn = tree.knn(queries.row(i).transpose(), k);
    std::copy(nn.begin(), nn.end(), table.begin() + i * k);
  }
  return table;
}

std::vector<Index> knn_graph(const Points& points, Index k) { return knn_query(points, points, k); }

NearestResult nearest_neighbors(const Points& queries, const Points& reference) {
  const KdTree tree(reference);
  NearestResult result;
  result.index.resize(static_cast<std::size_t>(queries.rows()));
  result.sq_dist.resize(static_cast<std::size_t>(queries.rows()));
  for (Index i = 0; i < queries.rows(); ++i) {
    const auto [idx, d] = tree.nearest(queries.row(i).transpose());
    result.index[static_cast<std::size_t>(i)] = idx;
    result.sq_dist[static_cast<std::size_t>(i)] = d;
  }
  return result;
}

}  // namespace cotpcc
