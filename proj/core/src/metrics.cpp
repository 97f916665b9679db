// Copyright 2026 The PartGen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "partgen/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "partgen/error.hpp"

namespace partgen {

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  std::vector<int32_t> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points_.size());
  if (!idx.empty()) root_ = build(idx, 0, idx.size(), 0);
}

int32_t KdTree::build(std::vector<int32_t>& idx, std::size_t lo, std::size_t hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(mid),
                   idx.begin() + static_cast<std::ptrdiff_t>(hi), [&](int32_t a, int32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const int32_t id = static_cast<int32_t>(nodes_.size());
  nodes_.push_back({idx[mid], -1, -1, static_cast<int8_t>(axis)});
  const int32_t left = build(idx, lo, mid, depth + 1);
  const int32_t right = build(idx, mid + 1, hi, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int32_t node, const Vec3& q, double& best_sq) const {
  if (node < 0) return;
  const Node& nd = nodes_[node];
  const Vec3& p = points_[nd.point];
  best_sq = std::min(best_sq, (p - q).squared_norm());
  const double diff = q[nd.axis] - p[nd.axis];
  const int32_t near = diff < 0 ? nd.left : nd.right;
  const int32_t far = diff < 0 ? nd.right : nd.left;
  search(near, q, best_sq);
  if (diff * diff < best_sq) search(far, q, best_sq);
}

double KdTree::nearest_distance(const Vec3& q) const {
  if (root_ < 0) throw Error(ErrorCode::kEmptyInput, "KdTree: empty tree");
  double best = std::numeric_limits<double>::infinity();
  search(root_, q, best);
  return std::sqrt(best);
}

std::vector<double> nearest_distances(const PointCloud& from, const PointCloud& to) {
  if (from.empty() || to.empty()) throw Error(ErrorCode::kEmptyInput, "nearest_distances: empty cloud");
  const KdTree tree(to.points);
  std::vector<double> d(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) d[i] = tree.nearest_distance(from.points[i]);
  return d;
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  const auto dab = nearest_distances(a, b);
  const auto dba = nearest_distances(b, a);
  const double ma = std::accumulate(dab.begin(), dab.end(), 0.0) / static_cast<double>(dab.size());
  const double mb = std::accumulate(dba.begin(), dba.end(), 0.0) / static_cast<double>(dba.size());
  return 0.5 * (ma + mb);
}

double fscore(const PointCloud& a, const PointCloud& b, double tau) {
  const auto dab = nearest_distances(a, b);
  const auto dba = nearest_distances(b, a);
  auto frac_within = [tau](const std::vector<double>& d) {
    const auto hits = std::count_if(d.begin(), d.end(), [tau](double x) { return x < tau; });
    return static_cast<double>(hits) / static_cast<double>(d.size());
  };
  const double precision = frac_within(dab);
  const double recall = frac_within(dba);
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace partgen
