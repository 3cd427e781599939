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

#include <cstddef>
#include <optional>

#include <Eigen/Core>

#include "bimodal/sh_lighting.hpp"
#include "bimodal/types.hpp"

namespace bimodal {

struct SfsConfig {
  double lambda_prior = 1.0;   // shape-prior weight, >= 0
  double lambda_norm = 10.0;   // unit-norm penalty weight, > 0
  int max_iterations = 1000;
  // A pixel whose objective ends below this counts as converged even at the cap.
  double residual_tolerance = 1e-12;
  // Hemisphere seeds tried when a pixel without a prior ends above residual_tolerance.
  int restarts = 48;
  // When non-empty, priors are used only where this mask is set.
  Mask prior_mask;
  unsigned threads = 1;
};

void validate(const SfsConfig& cfg);

/// Optional per-pixel prior normal, already expressed in the color camera frame.
struct PriorField : Grid2D<Vector3d> {
  using Grid2D<Vector3d>::Grid2D;
  PriorField() = default;
  explicit PriorField(Grid2D<Vector3d> g) : Grid2D<Vector3d>(std::move(g)) {}
};

using SfsResiduals = Eigen::Matrix<double, 7, 1>;
using SfsJacobian = Eigen::Matrix<double, 7, 3>;

/// Per-pixel least squares over a normal n expressed in its own frame:
///   r[0..2] = log S_j - [Q n; 1]^T M_j [Q n; 1]
///   r[3..5] = sqrt(lambda_prior) * (n - prior)        (zero without a prior)
///   r[6]    = sqrt(lambda_norm) * (n^T n - 1)
/// Q maps n into the shading camera frame (identity for plain SfS).
struct PixelProblem {
  PixelProblem(const ShLighting& lighting, const Vector3d& log_shading,
               std::optional<Vector3d> prior, double lambda_prior, double lambda_norm,
               const Matrix3d& to_shading = Matrix3d::Identity());

  void operator()(const Vector3d& n, SfsResiduals& r, SfsJacobian* j) const;
  SfsResiduals residuals(const Vector3d& n) const;
  double objective(const Vector3d& n) const { return residuals(n).squaredNorm(); }
  double brightness_cost(const Vector3d& n) const { return residuals(n).head<3>().squaredNorm(); }

  const ShLighting* lighting;
  Vector3d log_shading;
  std::optional<Vector3d> prior;
  double sqrt_prior;
  double sqrt_norm;
  Matrix3d to_shading;
};

SfsResiduals sfs_residuals(const Vector3d& n, const Vector3d& log_shading,
                           const ShLighting& lighting, const std::optional<Vector3d>& prior,
                           const SfsConfig& cfg);

struct PixelSolution {
  Vector3d normal = Vector3d::UnitZ();  // unit, n.z() >= 0
  double objective = 0.0;               // evaluated at `normal`
  int iterations = 0;
  bool converged = false;
};

/// Throws InvalidInput on a zero or non-finite init.
PixelSolution solve_pixel(const PixelProblem& problem, const SfsConfig& cfg, const Vector3d& init);
PixelSolution solve_pixel(const Vector3d& log_shading, const ShLighting& lighting,
                          const std::optional<Vector3d>& prior, const SfsConfig& cfg,
                          const Vector3d& init);

struct FieldSolution {
  NormalField normals;
  Grid2D<double> objective;
  std::size_t nonconverged = 0;
  double mean_objective = 0.0;
};

/// Independent per-pixel solves. Each pixel starts from its prior when one is
/// present and from (0, 0, 1) otherwise.
FieldSolution solve_field(const LogShadingImage& shading, const ShLighting& lighting,
                          const PriorField& priors, const SfsConfig& cfg);

}  // namespace bimodal
