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

#include "bimodal/types.hpp"

#include <Eigen/LU>

#include "bimodal/errors.hpp"

namespace bimodal {

namespace {

constexpr double kOrthonormalTolerance = 1e-9;

void check_rotation(const Matrix3d& r) {
  if (!r.allFinite()) throw InvalidInput("SimilarityPose: non-finite rotation");
  if ((r.transpose() * r - Matrix3d::Identity()).norm() > kOrthonormalTolerance ||
      std::abs(r.determinant() - 1.0) > kOrthonormalTolerance)
    throw InvalidInput("SimilarityPose: rotation is not proper orthonormal");
}

}  // namespace

SimilarityPose::SimilarityPose(double scale, const Matrix3d& rotation,
                               const Vector3d& translation)
    : scale_(scale), rotation_(rotation), translation_(translation) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw InvalidInput("SimilarityPose: scale must be positive");
  if (!translation.allFinite()) throw InvalidInput("SimilarityPose: non-finite translation");
  check_rotation(rotation);
  const Vector3d rad = euler_xyz_angles(rotation_);
  euler_deg_ = rad.unaryExpr([](double a) { return rad2deg(a); });
}

SimilarityPose SimilarityPose::from_euler_deg(double scale, double alpha_deg, double beta_deg,
                                              double gamma_deg, const Vector3d& translation) {
  SimilarityPose pose(scale,
                      euler_xyz(deg2rad(alpha_deg), deg2rad(beta_deg), deg2rad(gamma_deg)),
                      translation);
  pose.euler_deg_ = Vector3d(alpha_deg, beta_deg, gamma_deg);
  return pose;
}

SimilarityPose SimilarityPose::inverse() const {
  const Matrix3d rt = rotation_.transpose();
  return SimilarityPose(1.0 / scale_, rt, -(rt * translation_) / scale_);
}

SimilarityPose SimilarityPose::operator*(const SimilarityPose& other) const {
  return SimilarityPose(scale_ * other.scale_, rotation_ * other.rotation_,
                        scale_ * (rotation_ * other.translation_) + translation_);
}

}  // namespace bimodal
