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

#include <optional>
#include <vector>

#include "bimodal/types.hpp"

namespace bimodal {

/// Finite-difference stencil along one axis: derivative = (v[hi] - v[lo]) / span,
/// where span is measured in pixels. Central in the interior, one-sided at the
/// grid border. Shared by differentiation and integration so the pair is exact.
struct Stencil {
  int lo;
  int hi;
  int span;
};

inline std::optional<Stencil> axis_stencil(int i, int n) {
  if (n < 2) return std::nullopt;
  if (i == 0) return Stencil{0, 1, 1};
  if (i == n - 1) return Stencil{n - 2, n - 1, 1};
  return Stencil{i - 1, i + 1, 2};
}

/// Normal from surface gradients: (-p, -q, 1) / sqrt(1 + p^2 + q^2).
inline Vector3d normal_from_gradient(double p, double q) {
  return Vector3d(-p, -q, 1.0) / std::sqrt(1.0 + p * p + q * q);
}

/// Angle between two directions in radians, accurate near zero.
inline double angular_distance(const Vector3d& a, const Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Throws InvalidInput when a masked-in depth is non-finite or a pitch is not positive.
void validate(const DepthGrid& depth);
/// Throws InvalidInput when a masked-in normal is not unit or not camera-facing.
void validate(const NormalField& normals, double tolerance = 1e-9);
void validate(const PointCloud& cloud);

/// Pixels whose stencil touches a hole are masked out. Throws when fewer
/// than four pixels are masked in.
NormalField depth_to_normals(const DepthGrid& depth);

/// Orthographic lift (x, y) = (column * pitch_x, row * pitch_y).
PointCloud depth_to_pointcloud(const DepthGrid& depth);

/// Points on the bilinear interpolant of the depth, `factor` samples per pixel
/// along each axis inside every cell whose four corners are valid, plus every
/// valid grid point. `pixel` holds the grid pixel nearest to each sample.
/// factor = 1 reproduces depth_to_pointcloud.
struct SampledSurface {
  PointCloud cloud;
  std::vector<int> pixel;
};

SampledSurface sample_surface(const DepthGrid& depth, int factor);

PointCloud apply_pose(const SimilarityPose& pose, const PointCloud& cloud);

/// Normals rotate by R only; scale and translation do not apply.
NormalField rotate_normals(const SimilarityPose& pose, const NormalField& normals);

}  // namespace bimodal
