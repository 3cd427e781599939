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
#include <vector>

#include "bimodal/errors.hpp"
#include "bimodal/refine.hpp"
#include "bimodal/registration.hpp"
#include "bimodal/sfs.hpp"
#include "bimodal/sh_lighting.hpp"
#include "bimodal/types.hpp"

namespace bimodal {

/// Registration settings for the outer loop. Affine fits to nearest-neighbour
/// pairs on pixel grids carry a few percent of anisotropy from quantization,
/// so the similarity check is loosened to flag only gross departures.
inline RegistrationConfig pipeline_registration() {
  RegistrationConfig r;
  r.ransac.isotropy_tolerance = 0.25;
  return r;
}

struct PipelineConfig {
  // Stop once ||R(k) - R(k-1)||_F falls below this (checked from k = 2).
  double threshold = 1e-3;
  int max_iterations = 50;
  // Stop after this many consecutive increases of the rotation delta and
  // return the iteration with the smallest delta.
  int divergence_patience = 5;
  SfsConfig sfs;
  RegistrationConfig registration = pipeline_registration();
  RefineConfig refine;
  // Samples per pixel and axis of the color-side cloud (1 = grid points only).
  int target_upsampling = 1;
  // Take priors from the unrefined depth normals instead of the refined ones.
  bool literal_prior = false;
};

void validate(const PipelineConfig& cfg);

struct IterationRecord {
  int k = 0;
  double rot_delta = 0.0;  // ||R(k) - R(k-1)||_F with R(0) = I
  double beta_deg = 0.0;
  std::size_t inliers = 0;
  double sfs_mean_residual = 0.0;
  std::size_t sfs_nonconverged = 0;
  std::size_t priors = 0;
  SimilarityPose pose;
};

struct PipelineResult {
  NormalField normals;         // n*, color frame
  DepthGrid depth;             // z*, color grid
  SimilarityPose pose;         // maps the depth-map cloud onto the color-side cloud
  DepthGrid refined_depth;     // z_R*
  NormalField refined_normals;
  CorrespondenceSet correspondences;
  std::vector<IterationRecord> trace;
  // Index into `trace` of the returned state.
  std::size_t selected = 0;
  bool converged = false;
  bool diverged = false;
};

/// Registration failed at some iteration; carries the trace up to that point.
class PipelineFailure : public RegistrationFailure {
 public:
  PipelineFailure(const std::string& what, std::vector<IterationRecord> trace)
      : RegistrationFailure(what), trace_(std::move(trace)) {}
  const std::vector<IterationRecord>& trace() const { return trace_; }

 private:
  std::vector<IterationRecord> trace_;
};

/// Alternates shape from shading, integration, registration and refinement.
/// The first pass has no prior; later passes put R n_R (refined) on the color
/// pixels matched in the previous iteration.
PipelineResult run_bimodal_stereo(const LogShadingImage& shading, const DepthGrid& z_r,
                                  const ShLighting& lighting, const PipelineConfig& cfg = {});

/// Averages R n_src(h) over the pairs landing on each color pixel.
PriorField build_priors(const CorrespondenceSet& corr, const NormalField& n_src,
                        const SimilarityPose& pose, int width, int height);

}  // namespace bimodal
