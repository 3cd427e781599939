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

#include "bimodal/geometry.hpp"

#include <string>

#include "bimodal/errors.hpp"

namespace bimodal {

void validate(const DepthGrid& depth) {
  if (!(depth.pitch_x > 0.0) || !(depth.pitch_y > 0.0))
    throw InvalidInput("DepthGrid: pixel pitch must be positive");
  for (std::size_t i = 0; i < depth.z.size(); ++i)
    if (depth.z.valid(i) && !std::isfinite(depth.z[i]))
      throw InvalidInput("DepthGrid: non-finite masked-in depth at pixel " + std::to_string(i));
}

void validate(const NormalField& normals, double tolerance) {
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (!normals.valid(i)) continue;
    const Vector3d& n = normals[i];
    if (!n.allFinite() || std::abs(n.norm() - 1.0) > tolerance || !(n.z() > 0.0))
      throw InvalidInput("NormalField: invalid normal at pixel " + std::to_string(i));
  }
}

void validate(const PointCloud& cloud) {
  for (const auto& p : cloud.points)
    if (!p.allFinite()) throw InvalidInput("PointCloud: non-finite coordinate");
  if (cloud.has_source()) {
    if (cloud.source.size() != cloud.points.size())
      throw InvalidInput("PointCloud: source index count mismatch");
    const long long cells = static_cast<long long>(cloud.grid_width) * cloud.grid_height;
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(cells), 0);
    for (int s : cloud.source) {
      if (s < 0 || s >= cells) throw InvalidInput("PointCloud: source index out of grid");
      if (seen[static_cast<std::size_t>(s)]++) throw InvalidInput("PointCloud: duplicate source index");
    }
  }
}

NormalField depth_to_normals(const DepthGrid& depth) {
  validate(depth);
  const auto& z = depth.z;
  if (z.count_valid() < 4) throw InvalidInput("depth_to_normals: fewer than 4 valid pixels");

  const int w = z.width();
  const int h = z.height();
  NormalField out(w, h, Vector3d::Zero(), false);
  for (int y = 0; y < h; ++y) {
    const auto sy = axis_stencil(y, h);
    for (int x = 0; x < w; ++x) {
      const auto sx = axis_stencil(x, w);
      if (!sx || !sy || !z.valid(x, y)) continue;
      if (!z.valid(sx->lo, y) || !z.valid(sx->hi, y) || !z.valid(x, sy->lo) ||
          !z.valid(x, sy->hi))
        continue;
      const double p = (z(sx->hi, y) - z(sx->lo, y)) / (sx->span * depth.pitch_x);
      const double q = (z(x, sy->hi) - z(x, sy->lo)) / (sy->span * depth.pitch_y);
      Vector3d n = normal_from_gradient(p, q);
      if (n.z() < 0.0) n = -n;
      out(x, y) = n;
      out.set_valid(x, y, true);
    }
  }
  return out;
}

PointCloud depth_to_pointcloud(const DepthGrid& depth) {
  validate(depth);
  const auto& z = depth.z;
  PointCloud cloud;
  cloud.grid_width = z.width();
  cloud.grid_height = z.height();
  cloud.points.reserve(z.count_valid());
  cloud.source.reserve(z.count_valid());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!z.valid(i)) continue;
    cloud.points.emplace_back(z.x_of(i) * depth.pitch_x, z.y_of(i) * depth.pitch_y, z[i]);
    cloud.source.push_back(static_cast<int>(i));
  }
  if (cloud.points.empty()) throw InvalidInput("depth_to_pointcloud: empty mask");
  return cloud;
}

SampledSurface sample_surface(const DepthGrid& depth, int factor) {
  if (factor < 1) throw InvalidInput("sample_surface: factor must be >= 1");
  SampledSurface out;
  out.cloud = depth_to_pointcloud(depth);
  out.pixel = out.cloud.source;
  if (factor == 1) return out;
  out.cloud.source.clear();

  const auto& z = depth.z;
  for (int y = 0; y + 1 < z.height(); ++y) {
    for (int x = 0; x + 1 < z.width(); ++x) {
      if (!z.valid(x, y) || !z.valid(x + 1, y) || !z.valid(x, y + 1) || !z.valid(x + 1, y + 1))
        continue;
      for (int b = 0; b < factor; ++b) {
        for (int a = 0; a < factor; ++a) {
          if (a == 0 && b == 0) continue;  // grid points are already present
          const double u = static_cast<double>(a) / factor;
          const double v = static_cast<double>(b) / factor;
          const double h = (1 - u) * (1 - v) * z(x, y) + u * (1 - v) * z(x + 1, y) +
                           (1 - u) * v * z(x, y + 1) + u * v * z(x + 1, y + 1);
          out.cloud.points.emplace_back((x + u) * depth.pitch_x, (y + v) * depth.pitch_y, h);
          out.pixel.push_back(static_cast<int>(z.index(x + (2 * a >= factor ? 1 : 0),
                                                       y + (2 * b >= factor ? 1 : 0))));
        }
      }
    }
  }
  return out;
}

PointCloud apply_pose(const SimilarityPose& pose, const PointCloud& cloud) {
  PointCloud out = cloud;
  for (auto& p : out.points) p = pose.apply(p);
  return out;
}

NormalField rotate_normals(const SimilarityPose& pose, const NormalField& normals) {
  NormalField out = normals;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out.valid(i)) out[i] = (pose.rotation() * out[i]).normalized();
  return out;
}

}  // namespace bimodal
