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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bimodal/pipeline.hpp"
#include "bimodal/sh_lighting.hpp"
#include "bimodal/types.hpp"

namespace bimodal {

/// Smooth face-like height field: a broad head bump with nose, brow, eye
/// sockets and chin. Relief is about 0.3 * width in pixel units.
DepthGrid face_surface(int width = 32, int height = 32);

/// Lighting under which the standard scene's per-pixel SfS is well posed.
ShLighting default_lighting();

struct SynthSpec {
  DepthGrid source;
  ShLighting lighting;
  double alpha_deg = 0.0;
  double beta_deg = 0.0;
  double gamma_deg = 0.0;
  double overlap = 1.0;  // P_w in (0, 1]
  int stride = 1;
  double prior_percentage = 0.0;  // P_er in [0, 1]
  double depth_noise = 0.0;       // std-dev of additive Gaussian depth noise
  std::uint64_t seed = 0;
};

void validate(const SynthSpec& spec);

struct SynthPair {
  LogShadingImage shading;  // color view, rendered from the source normals
  DepthGrid depth;          // second view: rotated, clipped, subsampled
  SimilarityPose pose;      // maps the depth cloud onto the source cloud
  NormalField normals;      // ground-truth normals of the color view
  Mask prior_mask;          // P_er selection over the shading pixels
  // Masked-in cells of the rotated raster before clipping.
  std::size_t footprint = 0;
};

/// Rotates the source surface by Rx(alpha) Ry(beta) Rz(gamma) (the inverse of
/// the returned pose), rasterizes it on the unit lattice of the rotated view,
/// keeps the centered column strip whose cell count is closest to
/// overlap * footprint, crops to it and subsamples by `stride`.
SynthPair synthesize_pair(const SynthSpec& spec);

/// Piecewise-linear surface through the masked-in grid points, two triangles
/// per fully valid quad, z-buffered (largest z wins) on the integer lattice
/// of its own xy bounding box. `origin` receives the lattice origin.
DepthGrid rasterize_surface(const DepthGrid& source, const SimilarityPose& pose,
                            Vector3d* origin = nullptr);

/// Uniformly random subset of the masked-in pixels of size round(P_er * count).
/// Subsets for one seed are nested in P_er.
Mask select_prior_pixels(std::span<const std::uint8_t> mask, double prior_percentage,
                         std::uint64_t seed);

/// Seed for one sweep cell, derived from the global seed and the cell.
std::uint64_t cell_seed(std::uint64_t seed, double beta_deg, double overlap);

struct SweepConfig {
  PipelineConfig pipeline;
  int stride = 1;
  double depth_noise = 0.0;
  std::uint64_t seed = 0;
};

struct SweepCell {
  double beta_deg = 0.0;
  double overlap = 0.0;
  bool failed = false;
  double error = 0.0;  // rotation_error against ground truth
  int iterations = 0;
  Vector3d euler_deg = Vector3d::Zero();
  double scale = 1.0;
  std::string message;
};

struct SweepTable {
  std::vector<double> betas;
  std::vector<double> overlaps;
  std::vector<SweepCell> cells;  // row-major: beta rows, overlap columns

  const SweepCell& at(std::size_t row, std::size_t col) const {
    return cells[row * overlaps.size() + col];
  }
};

/// Rotation about y by each beta, for each overlap; failures become marked cells.
SweepTable run_sweep(const DepthGrid& source, const ShLighting& lighting,
                     const std::vector<double>& betas, const std::vector<double>& overlaps,
                     const SweepConfig& cfg);

}  // namespace bimodal
