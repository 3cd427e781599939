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

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "bimodal/grid.hpp"

namespace bimodal {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

template <typename Scalar>
constexpr Scalar deg2rad(Scalar deg) {
  return deg * std::numbers::pi_v<Scalar> / Scalar(180);
}
template <typename Scalar>
constexpr Scalar rad2deg(Scalar rad) {
  return rad * Scalar(180) / std::numbers::pi_v<Scalar>;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rot_x(Scalar rad) {
  using std::cos, std::sin;
  Eigen::Matrix<Scalar, 3, 3> r;
  r << Scalar(1), Scalar(0), Scalar(0), Scalar(0), cos(rad), -sin(rad), Scalar(0), sin(rad),
      cos(rad);
  return r;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rot_y(Scalar rad) {
  using std::cos, std::sin;
  Eigen::Matrix<Scalar, 3, 3> r;
  r << cos(rad), Scalar(0), sin(rad), Scalar(0), Scalar(1), Scalar(0), -sin(rad), Scalar(0),
      cos(rad);
  return r;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rot_z(Scalar rad) {
  using std::cos, std::sin;
  Eigen::Matrix<Scalar, 3, 3> r;
  r << cos(rad), -sin(rad), Scalar(0), sin(rad), cos(rad), Scalar(0), Scalar(0), Scalar(0),
      Scalar(1);
  return r;
}

/// R = Rx(alpha) * Ry(beta) * Rz(gamma), angles in radians.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> euler_xyz(Scalar alpha, Scalar beta, Scalar gamma) {
  return rot_x(alpha) * rot_y(beta) * rot_z(gamma);
}

/// Closed-form inverse of euler_xyz for a proper rotation. Returns radians.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 1> euler_xyz_angles(
    const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  using std::asin, std::atan2, std::clamp;
  const Scalar sb = clamp(r(0, 2), Scalar(-1), Scalar(1));
  return {atan2(-r(1, 2), r(2, 2)), asin(sb), atan2(-r(0, 1), r(0, 0))};
}

/// Per-pixel depth (scene units) with a validity mask and a pixel pitch.
/// Depth is a height toward the viewer: surfaces face +z.
struct DepthGrid {
  Grid2D<double> z;
  double pitch_x = 1.0;
  double pitch_y = 1.0;

  DepthGrid() = default;
  DepthGrid(int width, int height, double fill = 0.0, bool valid = true)
      : z(width, height, fill, valid) {}
  explicit DepthGrid(Grid2D<double> values, double px = 1.0, double py = 1.0)
      : z(std::move(values)), pitch_x(px), pitch_y(py) {}

  int width() const { return z.width(); }
  int height() const { return z.height(); }
};

/// Unit normals, camera-facing (n.z() > 0) where masked in.
struct NormalField : Grid2D<Vector3d> {
  using Grid2D<Vector3d>::Grid2D;
  NormalField() = default;
  explicit NormalField(Grid2D<Vector3d> g) : Grid2D<Vector3d>(std::move(g)) {}
};

/// Per-pixel (log R, log G, log B).
struct LogShadingImage : Grid2D<Vector3d> {
  using Grid2D<Vector3d>::Grid2D;
  LogShadingImage() = default;
  explicit LogShadingImage(Grid2D<Vector3d> g) : Grid2D<Vector3d>(std::move(g)) {}
};

struct PointCloud {
  std::vector<Vector3d> points;
  // Pixel index in the originating grid; empty when the cloud has no grid.
  std::vector<int> source;
  int grid_width = 0;
  int grid_height = 0;

  std::size_t size() const { return points.size(); }
  bool has_source() const { return !source.empty(); }
};

/// T(p) = s * R * p + t.
class SimilarityPose {
 public:
  SimilarityPose() = default;
  SimilarityPose(double scale, const Matrix3d& rotation, const Vector3d& translation);

  static SimilarityPose identity() { return {}; }
  static SimilarityPose from_euler_deg(double scale, double alpha_deg, double beta_deg,
                                       double gamma_deg, const Vector3d& translation);

  double scale() const { return scale_; }
  const Matrix3d& rotation() const { return rotation_; }
  const Vector3d& translation() const { return translation_; }
  /// (alpha, beta, gamma) in degrees such that R = Rx(alpha) Ry(beta) Rz(gamma).
  const Vector3d& euler_deg() const { return euler_deg_; }

  Vector3d apply(const Vector3d& p) const { return scale_ * (rotation_ * p) + translation_; }
  Vector3d rotate(const Vector3d& n) const { return rotation_ * n; }
  SimilarityPose inverse() const;
  /// (this * other)(p) = this(other(p)).
  SimilarityPose operator*(const SimilarityPose& other) const;

 private:
  double scale_ = 1.0;
  Matrix3d rotation_ = Matrix3d::Identity();
  Vector3d translation_ = Vector3d::Zero();
  Vector3d euler_deg_ = Vector3d::Zero();
};

}  // namespace bimodal
