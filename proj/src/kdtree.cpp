// Copyright 2026 The Bimodal Stereo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bimodal/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace bimodal {

KdTree3::KdTree3(std::span<const Vector3d> points) : points_(points.begin(), points.end()) {
  std::vector<int> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, static_cast<int>(idx.size()));
}

int KdTree3::build(std::vector<int>& idx, int begin, int end) {
  if (begin >= end) return -1;
  Vector3d lo = Vector3d::Constant(std::numeric_limits<double>::infinity());
  Vector3d hi = -lo;
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
    hi = hi.cwiseMax(points_[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(idx.begin() + begin, idx.begin() + mid, idx.begin() + end, [&](int a, int b) {
    const double va = points_[static_cast<std::size_t>(a)](axis);
    const double vb = points_[static_cast<std::size_t>(b)](axis);
    return va < vb || (va == vb && a < b);
  });
  const int node = static_cast<int>(nodes_.size());
  nodes_.push_back({idx[static_cast<std::size_t>(mid)], end - begin > 1 ? axis : -1});
  const int left = build(idx, begin, mid);
  const int right = build(idx, mid + 1, end);
  nodes_[static_cast<std::size_t>(node)].left = left;
  nodes_[static_cast<std::size_t>(node)].right = right;
  return node;
}

KdTree3::Hit KdTree3::nearest(const Vector3d& query) const { return nearest(query, -1); }

KdTree3::Hit KdTree3::nearest(const Vector3d& query, int exclude) const {
  Hit best{-1, std::numeric_limits<double>::infinity()};
  search(root_, query, exclude, best);
  return best;
}

void KdTree3::search(int node, const Vector3d& q, int exclude, Hit& best) const {
  if (node < 0) return;
  const Node& nd = nodes_[static_cast<std::size_t>(node)];
  const Vector3d& p = points_[static_cast<std::size_t>(nd.point)];
  const double d2 = (p - q).squaredNorm();
  if (nd.point != exclude && (d2 < best.distance2 || (d2 == best.distance2 && nd.point < best.index)))
    best = {nd.point, d2};
  if (nd.axis < 0) return;
  const double diff = q(nd.axis) - p(nd.axis);
  const int near = diff < 0 ? nd.left : nd.right;
  const int far = diff < 0 ? nd.right : nd.left;
  search(near, q, exclude, best);
  // <= keeps equal-distance candidates reachable for the index tie-break.
  if (diff * diff <= best.distance2) search(far, q, exclude, best);
}

}  // namespace bimodal
