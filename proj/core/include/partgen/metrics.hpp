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

#pragma once

#include <vector>

#include "partgen/mesh.hpp"

namespace partgen {

/// Static 3-d tree over a point set for exact nearest-neighbor queries.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points);

  /// Distance from q to its nearest point in the tree. Tree must be non-empty.
  double nearest_distance(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int32_t point;
    int32_t left = -1;
    int32_t right = -1;
    int8_t axis = 0;
  };
  int32_t build(std::vector<int32_t>& idx, std::size_t lo, std::size_t hi, int depth);
  void search(int32_t node, const Vec3& q, double& best_sq) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  int32_t root_ = -1;
};

/// For every point of `from`, distance to its nearest neighbor in `to`.
std::vector<double> nearest_distances(const PointCloud& from, const PointCloud& to);

/// 0.5 * (mean_a d(a, B) + mean_b d(b, A)); unsquared L2.
double chamfer(const PointCloud& a, const PointCloud& b);

/// Harmonic mean of precision (pred points within tau of gt) and recall (gt
/// points within tau of pred). `a` is the prediction, `b` the reference.
double fscore(const PointCloud& a, const PointCloud& b, double tau = 0.1);

}  // namespace partgen
