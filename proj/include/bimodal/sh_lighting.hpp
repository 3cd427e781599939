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

#include <array>

#include <Eigen/Core>

#include "bimodal/types.hpp"

namespace bimodal {

namespace sh {
inline constexpr double c1 = 0.429043;
inline constexpr double c2 = 0.511664;
inline constexpr double c3 = 0.743125;
inline constexpr double c4 = 0.886227;
inline constexpr double c5 = 0.247708;
inline constexpr int kCoefficientsPerChannel = 9;
inline constexpr int kChannels = 3;
inline constexpr int kCoefficients = kCoefficientsPerChannel * kChannels;
}  // namespace sh

/// 27 coefficients, channel-major: [R L1..L9, G L1..L9, B L1..L9]. L1 is the
/// constant band, L2..L4 the linear band (y, z, x), L5..L9 the quadratic band.
using ShVector = Eigen::Matrix<double, sh::kCoefficients, 1>;
using Eigen::Matrix4d;
using Eigen::Vector4d;

/// Second-order spherical-harmonics lighting in quadratic-form representation:
/// log S_j(n) = [n; 1]^T M_j [n; 1].
class ShLighting {
 public:
  ShLighting();
  explicit ShLighting(const ShVector& coefficients);

  const ShVector& coefficients() const { return coefficients_; }
  const Matrix4d& m(int channel) const { return m_[static_cast<std::size_t>(channel)]; }

  double shade(int channel, const Vector3d& n) const {
    const Vector4d nh(n.x(), n.y(), n.z(), 1.0);
    return nh.dot(m(channel) * nh);
  }
  Vector3d shade(const Vector3d& n) const { return {shade(0, n), shade(1, n), shade(2, n)}; }

  /// d shade(channel, n) / d n = 2 * (M_j [n; 1]) restricted to the first three rows.
  Vector3d shade_gradient(int channel, const Vector3d& n) const {
    const Vector4d nh(n.x(), n.y(), n.z(), 1.0);
    return 2.0 * (m(channel) * nh).head<3>();
  }

 private:
  ShVector coefficients_;
  std::array<Matrix4d, sh::kChannels> m_;
};

/// Builds the three symmetric 4x4 matrices. Throws InvalidInput on non-finite input.
ShLighting build_m_matrices(const ShVector& coefficients);

LogShadingImage render_log_shading(const ShLighting& lighting, const NormalField& normals);

/// Gaussian prior over the 27 lighting coefficients, evaluation only.
struct LightingPrior {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(sh::kCoefficients);
  Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(sh::kCoefficients, sh::kCoefficients);
  double weight = 0.0;
};

/// weight * (L - mean)^T precision (L - mean). Throws InvalidInput on a
/// dimension mismatch, asymmetric precision or negative weight.
double lighting_prior_cost(const LightingPrior& prior, const Eigen::VectorXd& coefficients);

}  // namespace bimodal
