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
#include <optional>
#include <span>
#include <vector>

#include "bimodal/types.hpp"

namespace bimodal {

// ---------------------------------------------------------------------------
// ICP

struct IcpConfig {
  int max_iterations = 100;
  // Stop once a sweep improves the objective by less than this fraction.
  double tolerance = 1e-10;
  // Runs whose scale leaves this range are abandoned (scale collapse).
  double min_scale = 0.25;
  double max_scale = 4.0;
};

struct IcpResult {
  SimilarityPose pose;
  // Mean squared nearest-neighbour distance divided by the scale, after each
  // accepted sweep; the first entry is the value at the initial pose.
  // Non-increasing.
  std::vector<double> objective;
  int iterations = 0;
  bool scale_out_of_range = false;
};

/// Identity rotation with matched centroids and RMS radii. A sensible start
/// when the two clouds cover the same surface.
SimilarityPose moment_matched_pose(const PointCloud& source, const PointCloud& target);

/// Point-to-point ICP with a closed-form similarity fit per sweep (Kabsch
/// rotation, symmetric RMS-ratio scale), which minimizes the objective above
/// for fixed matches. Maps `source` onto `target`, starting from `init` or,
/// without one, from moment_matched_pose. Throws DegenerateSample for clouds
/// with fewer than four points or collinear points.
IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpConfig& cfg = {},
                    const std::optional<SimilarityPose>& init = std::nullopt);

struct MultiStartConfig {
  IcpConfig icp;
  // Euler grid (degrees) of starting rotations; every (alpha, beta, gamma) combination is tried.
  std::vector<double> angles_deg = {-60.0, -30.0, 0.0, 30.0, 60.0};
  // Full-overlap hint: also start from the RMS-radius scale ratio and from
  // principal-axis alignment.
  bool try_rms_scale = false;
  int coarse_iterations = 30;
  // How many of the best coarse starts are run to convergence.
  int refine_candidates = 3;
  // Rounds of one-sample translation restarts after refinement (0 disables).
  int shift_rounds = 5;
};

/// ICP from a grid of centroid-aligned starting rotations. The
/// `refine_candidates` starts with the lowest objective after
/// `coarse_iterations` sweeps are run to convergence; the best one then gets
/// translation restarts of about one sample spacing to leave aliased minima.
IcpResult icp_align_multistart(const PointCloud& source, const PointCloud& target,
                               const MultiStartConfig& cfg = {});

// ---------------------------------------------------------------------------
// Correspondences

struct Correspondence {
  int source = -1;  // index into the source cloud (P_c)
  int target = -1;  // index into the target cloud (P_c*)
  int source_pixel = -1;
  int target_pixel = -1;
  double distance = 0.0;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  double threshold = 1.0;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Maps every source point through `pose`, finds its nearest target point and
/// keeps the pair when the distance is below `threshold`. `target_pixels`,
/// when given, replaces target.source as the pixel of each target point.
CorrespondenceSet build_correspondences(const SimilarityPose& pose, const PointCloud& source,
                                        const PointCloud& target, double threshold = 1.0,
                                        std::span<const int> target_pixels = {});

// ---------------------------------------------------------------------------
// Linear RST model and RANSAC

/// x = A y + t with A unconstrained (12 parameters).
struct RstModel {
  Matrix3d a = Matrix3d::Identity();
  Vector3d t = Vector3d::Zero();

  Vector3d apply(const Vector3d& y) const { return a * y + t; }
};

/// Least squares over the stacked 3n x 12 system b = A(y) theta with
/// theta = [a11 a12 a13 a21 a22 a23 a31 a32 a33 t1 t2 t3]. Throws
/// DegenerateSample when the system has rank < 12.
RstModel fit_rst_linear(std::span<const Vector3d> source, std::span<const Vector3d> target);

struct RansacConfig {
  int iterations = 1000;
  double inlier_threshold = 1.0;
  int min_sample = 4;
  std::uint64_t seed = 0;
  // A hypothesis must explain at least this fraction of the correspondences
  // (and more than min_sample of them) to count as a registration.
  double min_inlier_ratio = 0.25;
  // Passed to decompose_rotation.
  double isotropy_tolerance = 0.01;
};

void validate(const RansacConfig& cfg);

struct RansacResult {
  SimilarityPose pose;
  RstModel model;
  std::vector<int> inliers;
  double inlier_residual = 0.0;
};

/// Consensus is the inlier count, ties broken by the smaller summed inlier
/// residual and then by the earlier sample. The winning sample's inliers are
/// refit linearly and decomposed into a similarity. Throws RegistrationFailure
/// when no hypothesis reaches the consensus floor.
RansacResult ransac_rst(std::span<const Vector3d> source, std::span<const Vector3d> target,
                        const RansacConfig& cfg);

// ---------------------------------------------------------------------------
// Euler decomposition

struct EulerDecomposition {
  double scale = 1.0;
  Vector3d euler_deg = Vector3d::Zero();  // (alpha, beta, gamma)
  Matrix3d rotation = Matrix3d::Identity();
  // ||Rx Ry Rz - A / s||_F at the solution.
  double residual = 0.0;
};

/// A = s * Rx(alpha) Ry(beta) Rz(gamma). s = det(A)^(1/3); the angles start
/// from the closed-form XYZ extraction and are refined by Levenberg-Marquardt.
/// Throws ReflectionError for det(A) <= 0 and NotASimilarity when the singular
/// values of A differ by more than `isotropy_tolerance` (relative).
EulerDecomposition decompose_rotation(const Matrix3d& a, double isotropy_tolerance = 0.01);

/// || R_est / ||R_est|| - R_gt / ||R_gt|| ||, Frobenius norms throughout.
double rotation_error(const Matrix3d& r_est, const Matrix3d& r_gt);

// ---------------------------------------------------------------------------
// Full registration

struct RegistrationConfig {
  MultiStartConfig initial;
  double correspondence_threshold = 1.0;
  RansacConfig ransac;
};

struct RegistrationResult {
  SimilarityPose pose;
  CorrespondenceSet correspondences;  // built under the final pose
  std::size_t inliers = 0;
  double icp_objective = 0.0;
};

/// ICP (multi-start when `init` is empty, warm-started otherwise), then
/// correspondence acceptance, then RANSAC over the RST model.
RegistrationResult register_clouds(const PointCloud& source, const PointCloud& target,
                                   const RegistrationConfig& cfg,
                                   const std::optional<SimilarityPose>& init = std::nullopt,
                                   std::span<const int> target_pixels = {});

}  // namespace bimodal
