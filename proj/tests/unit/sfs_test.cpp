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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bimodal/sfs.hpp"
#include "bimodal/synthgen.hpp"
#include "test_util.hpp"

namespace bimodal {
namespace {

using testing::random_lighting;
using testing::random_normal;

TEST(SfsResiduals, ZeroAtTruth) {
  const ShLighting l = default_lighting();
  const Vector3d n = Vector3d(0.2, -0.3, 0.9).normalized();
  const SfsResiduals r = sfs_residuals(n, l.shade(n), l, n, SfsConfig{});
  EXPECT_LT(r.norm(), 1e-15);
}

TEST(SfsResiduals, ZeroPriorWeightIgnoresPrior) {
  const ShLighting l = default_lighting();
  SfsConfig cfg;
  cfg.lambda_prior = 0.0;
  const Vector3d n = Vector3d::UnitZ();
  const SfsResiduals r = sfs_residuals(n, l.shade(n), l, Vector3d::UnitX(), cfg);
  EXPECT_EQ(r.segment<3>(3), Vector3d::Zero());
}

TEST(SfsResiduals, NormPenaltyHandValue) {
  SfsConfig cfg;
  cfg.lambda_norm = 1.0;
  const SfsResiduals r =
      sfs_residuals(Vector3d(0, 0, 2), Vector3d::Zero(), default_lighting(), std::nullopt, cfg);
  EXPECT_DOUBLE_EQ(r(6), 3.0);
}

TEST(PixelProblem, JacobianMatchesCentralDifferences) {
  std::mt19937_64 rng(21);
  const ShLighting l = random_lighting(rng);
  const Matrix3d q = euler_xyz(0.2, -0.1, 0.3);
  const PixelProblem p(l, Vector3d(0.3, 0.1, -0.2), Vector3d(0, 0.6, 0.8), 2.0, 10.0, q);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector3d n = random_normal(rng) * 1.1;
    SfsResiduals r;
    SfsJacobian j;
    p(n, r, &j);
    for (int k = 0; k < 3; ++k) {
      Vector3d e = Vector3d::Zero();
      e(k) = 1e-6;
      const SfsResiduals fd = (p.residuals(n + e) - p.residuals(n - e)) / 2e-6;
      EXPECT_LT((j.col(k) - fd).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(SolvePixel, RoundTripWithPriorAtTruth) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const ShLighting l = random_lighting(rng);
    const Vector3d n0 = random_normal(rng);
    const PixelSolution s = solve_pixel(l.shade(n0), l, n0, SfsConfig{}, Vector3d::UnitZ());
    EXPECT_LT(angular_distance(s.normal, n0), 1e-4);
  }
}

TEST(SolvePixel, TruthIsFixedPoint) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const ShLighting l = random_lighting(rng, 0.3);
    const Vector3d n0 = random_normal(rng);
    const PixelSolution s = solve_pixel(l.shade(n0), l, std::nullopt, SfsConfig{}, n0);
    EXPECT_LE(s.objective, 1e-12);
    EXPECT_LT(angular_distance(s.normal, n0), 1e-6);
  }
}

TEST(SolvePixel, NoWorseThanHemisphereGrid) {
  std::mt19937_64 rng(33);
  const SfsConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    const ShLighting l = random_lighting(rng);
    const Vector3d shading = l.shade(random_normal(rng));
    const PixelProblem p(l, shading, std::nullopt, cfg.lambda_prior, cfg.lambda_norm);
    const double grid = testing::hemisphere_grid_min([&](const Vector3d& n) { return p.objective(n); });
    const PixelSolution s = solve_pixel(p, cfg, random_normal(rng, 89.0));
    EXPECT_LE(s.objective, grid + 1e-8);
    EXPECT_NEAR(s.objective, p.objective(s.normal), 1e-15);
  }
}

TEST(SolvePixel, StrongPriorWins) {
  std::mt19937_64 rng(34);
  SfsConfig cfg;
  cfg.lambda_prior = 1e6;
  for (int trial = 0; trial < 20; ++trial) {
    const ShLighting l = random_lighting(rng);
    const Vector3d truth = random_normal(rng);
    const Vector3d prior = random_normal(rng);
    const PixelSolution s = solve_pixel(l.shade(truth), l, prior, cfg, prior);
    EXPECT_LT(rad2deg(angular_distance(s.normal, prior)), 0.1);
  }
}

TEST(SolvePixel, OutputIsUnitAndCameraFacing) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 30; ++trial) {
    const ShLighting l = random_lighting(rng, 0.5);
    const Vector3d shading(testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1),
                           testing::uniform(rng, -1, 1));
    const PixelSolution s = solve_pixel(shading, l, std::nullopt, SfsConfig{}, Vector3d(0, 0.1, -1));
    EXPECT_NEAR(s.normal.norm(), 1.0, 1e-12);
    EXPECT_GE(s.normal.z(), 0.0);
  }
}

TEST(SolvePixel, RejectsZeroInit) {
  const ShLighting l = default_lighting();
  EXPECT_THROW(solve_pixel(Vector3d::Zero(), l, std::nullopt, SfsConfig{}, Vector3d::Zero()),
               InvalidInput);
}

TEST(SolveField, FlatScene) {
  const ShLighting l = default_lighting();
  const NormalField flat(6, 6, Vector3d::UnitZ());
  const FieldSolution s = solve_field(render_log_shading(l, flat), l, PriorField{}, SfsConfig{});
  for (std::size_t i = 0; i < s.normals.size(); ++i)
    EXPECT_LT(angular_distance(s.normals[i], Vector3d::UnitZ()), 1e-4);
}

TEST(SolveField, StandardSceneWithFullPrior) {
  const ShLighting l = default_lighting();
  const NormalField truth = depth_to_normals(face_surface());
  const LogShadingImage shading = render_log_shading(l, truth);
  const PriorField priors(truth);
  const FieldSolution s = solve_field(shading, l, priors, SfsConfig{});
  EXPECT_LT(rad2deg(testing::median(testing::angular_errors(s.normals, truth))), 2.0);
  EXPECT_NO_THROW(validate(s.normals));
}

TEST(SolveField, ErrorNonIncreasingInPriorPercentage) {
  const ShLighting l = default_lighting();
  const NormalField truth = depth_to_normals(face_surface());
  const LogShadingImage shading = render_log_shading(l, truth);
  const PriorField priors(truth);
  double previous = std::numeric_limits<double>::infinity();
  for (double per : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    SfsConfig cfg;
    cfg.prior_mask = select_prior_pixels(shading.mask(), per, 7);
    const FieldSolution s = solve_field(shading, l, priors, cfg);
    const double err = testing::mean(testing::angular_errors(s.normals, truth));
    EXPECT_LE(err, previous + 1e-12) << "P_er = " << per;
    previous = err;
  }
}

TEST(SolveField, ThreadCountDoesNotChangeResult) {
  const ShLighting l = default_lighting();
  const NormalField truth = depth_to_normals(testing::wavy_surface(12, 12));
  const LogShadingImage shading = render_log_shading(l, truth);
  SfsConfig one, four;
  four.threads = 4;
  const FieldSolution a = solve_field(shading, l, PriorField{}, one);
  const FieldSolution b = solve_field(shading, l, PriorField{}, four);
  for (std::size_t i = 0; i < a.normals.size(); ++i) EXPECT_EQ(a.normals[i], b.normals[i]);
}

TEST(SolveField, HolesPropagate) {
  const ShLighting l = default_lighting();
  NormalField truth(4, 4, Vector3d::UnitZ());
  truth.set_valid(std::size_t{5}, false);
  const FieldSolution s = solve_field(render_log_shading(l, truth), l, PriorField{}, SfsConfig{});
  EXPECT_FALSE(s.normals.valid(std::size_t{5}));
  EXPECT_EQ(s.normals.count_valid(), 15u);
}

TEST(SfsConfig, Validation) {
  SfsConfig cfg;
  cfg.lambda_norm = 0.0;
  EXPECT_THROW(validate(cfg), InvalidInput);
  cfg = SfsConfig{};
  cfg.max_iterations = 0;
  EXPECT_THROW(validate(cfg), InvalidInput);
  cfg = SfsConfig{};
  cfg.lambda_prior = -1.0;
  EXPECT_THROW(validate(cfg), InvalidInput);
}

}  // namespace
}  // namespace bimodal
