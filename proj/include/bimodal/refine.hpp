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

#include "bimodal/geometry.hpp"
#include "bimodal/registration.hpp"
#include "bimodal/sh_lighting.hpp"
#include "bimodal/types.hpp"

namespace bimodal {

struct RefineConfig {
  double lambda_prior = 1.0;  // pull toward the pulled-back color-side normal
  double lambda_norm = 10.0;
  int max_iterations = 1000;
  double residual_tolerance = 1e-12;
  int restarts = 48;
  unsigned threads = 1;
};

void validate(const RefineConfig& cfg);

/// Adds a correspondence for every depth hole whose four neighbours include at
/// least two corresponded pixels. The hole's depth is taken as the mean of its
/// valid neighbours and matched through `pose` like any other point; pairs
/// added here have source == -1 and carry only pixel indices.
CorrespondenceSet extend_to_holes(const CorrespondenceSet& corr, const DepthGrid& depth,
                                  const SimilarityPose& pose, const SampledSurface& target);

struct RefinedNormals {
  NormalField normals;
  // Depth pixels that were re-solved (the overlap).
  Mask touched;
  std::size_t nonconverged = 0;
};

/// Re-solves each corresponded depth pixel h against the color pixel i it maps
/// to: brightness of R n_h against log S_i, a pull toward R^T n_est(i), and the
/// unit-norm penalty. Starts from n_R(h) when it is valid (and keeps it if the
/// solve would raise the brightness cost), else from the pulled-back normal.
/// Other pixels are copied through.
RefinedNormals refine_normals(const NormalField& n_r, const LogShadingImage& shading,
                              const ShLighting& lighting, const SimilarityPose& pose,
                              const CorrespondenceSet& corr, const NormalField& n_est,
                              const RefineConfig& cfg = {});

/// Re-integrates the touched pixels from their normals and writes them back
/// into a copy of `depth`. Each connected piece of the integration is shifted
/// so its mean over input-valid touched pixels matches the input; pieces with
/// no input-valid pixel are left unwritten.
DepthGrid refine_depth(const NormalField& refined, const Mask& touched, const DepthGrid& depth);

/// RMSE of log S_i - render(R n_h) over corresponded pixels where `normals` is valid.
double forward_rmse(const NormalField& normals, const LogShadingImage& shading,
                    const ShLighting& lighting, const SimilarityPose& pose,
                    const CorrespondenceSet& corr);

}  // namespace bimodal
