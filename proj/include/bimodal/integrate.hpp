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

#include <vector>

#include "bimodal/types.hpp"

namespace bimodal {

/// (p, q) = (dz/dx, dz/dy) per pixel.
struct GradientField : Grid2D<Vector2d> {
  using Grid2D<Vector2d>::Grid2D;
  GradientField() = default;
};

/// p = -n1 / n3, q = -n2 / n3. Pixels with n3 < min_n3 are masked out.
GradientField normals_to_gradients(const NormalField& normals, double min_n3 = 1e-3);

struct IntegrationResult {
  DepthGrid depth;
  // Connected component of each solved pixel in the stencil graph, -1 elsewhere.
  Grid2D<int> component;
  int components = 0;
  // ||A^T (A z - b)|| / ||A^T b|| of the normal equations.
  double relative_residual = 0.0;
  // RMS of A z - b; nonzero for non-integrable fields.
  double rms_residual = 0.0;
};

/// Least-squares depth from gradients with the same stencils depth_to_normals
/// uses. Every masked-in gradient pixel contributes one equation per axis; the
/// solved pixels are the union of the stencils involved. The additive constant
/// of each connected component of the stencil graph is fixed by zero mean.
/// Throws SolverError if the normal equations are not met to 1e-8 relative.
IntegrationResult integrate_gradients(const GradientField& grads, double pitch_x = 1.0,
                                      double pitch_y = 1.0);

}  // namespace bimodal
