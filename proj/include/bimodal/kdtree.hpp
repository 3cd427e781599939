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

#pragma once

#include <span>
#include <vector>

#include "bimodal/types.hpp"

namespace bimodal {

/// Exact nearest-neighbour search over a fixed 3D point set. Ties resolve to
/// the lowest point index, so queries are deterministic.
class KdTree3 {
 public:
  struct Hit {
    int index = -1;
    double distance2 = 0.0;
  };

  KdTree3() = default;
  explicit KdTree3(std::span<const Vector3d> points);

  Hit nearest(const Vector3d& query) const;
  // Nearest point other than index `exclude`.
  Hit nearest(const Vector3d& query, int exclude) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int point;  // index into points_
    int axis;   // -1 for a leaf
    int left = -1;
    int right = -1;
  };

  int build(std::vector<int>& idx, int begin, int end);
  void search(int node, const Vector3d& q, int exclude, Hit& best) const;

  std::vector<Vector3d> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace bimodal
