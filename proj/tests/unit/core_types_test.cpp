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

#include "bimodal/geometry.hpp"
#include "bimodal/types.hpp"
#include "test_util.hpp"

namespace bimodal {
namespace {

using testing::random_normal;
using testing::uniform;

TEST(DepthToNormals, ConstantDepthFacesCamera) {
  const NormalField n = depth_to_normals(DepthGrid(6, 5, 5.0));
  ASSERT_EQ(n.count_valid(), 30u);
  for (std::size_t i = 0; i < n.size(); ++i) EXPECT_TRUE(n[i].isApprox(Vector3d::UnitZ(), 1e-15));
}

TEST(DepthToNormals, UnitSlopeInXAxis) {
  DepthGrid g(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) g.z(x, y) = x;
  const NormalField n = depth_to_normals(g);
  const Vector3d expected = Vector3d(-1.0, 0.0, 1.0) / std::sqrt(2.0);
  for (int y = 1; y < 7; ++y)
    for (int x = 1; x < 7; ++x) EXPECT_LT((n(x, y) - expected).norm(), 1e-12);
}

TEST(DepthToNormals, HoleMasksItsStencilNeighbours) {
  DepthGrid g(7, 7, 1.0);
  g.z.set_valid(3, 3, false);
  const NormalField n = depth_to_normals(g);
  EXPECT_FALSE(n.valid(3, 3));
  EXPECT_FALSE(n.valid(2, 3));
  EXPECT_FALSE(n.valid(4, 3));
  EXPECT_FALSE(n.valid(3, 2));
  EXPECT_FALSE(n.valid(3, 4));
  EXPECT_TRUE(n.valid(2, 2));
  EXPECT_TRUE(n.valid(0, 3));
}

TEST(DepthToNormals, PlanesRecoverAnalyticNormal) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = uniform(rng, -3, 3), b = uniform(rng, -3, 3), c = uniform(rng, -10, 10);
    DepthGrid g(9, 7);
    g.pitch_x = uniform(rng, 0.5, 2.0);
    g.pitch_y = uniform(rng, 0.5, 2.0);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x) g.z(x, y) = a * x * g.pitch_x + b * y * g.pitch_y + c;
    const NormalField n = depth_to_normals(g);
    const Vector3d expected = Vector3d(-a, -b, 1.0).normalized();
    for (std::size_t i = 0; i < n.size(); ++i) EXPECT_LT((n[i] - expected).norm(), 1e-9);
  }
}

TEST(DepthToNormals, OutputSatisfiesNormalInvariants) {
  const NormalField n = depth_to_normals(testing::wavy_surface(20, 16));
  EXPECT_NO_THROW(validate(n));
}

TEST(DepthToPointcloud, LiftsGrid) {
  const PointCloud c = depth_to_pointcloud(DepthGrid(2, 2, 0.0));
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c.points[0], Vector3d(0, 0, 0));
  EXPECT_EQ(c.points[1], Vector3d(1, 0, 0));
  EXPECT_EQ(c.points[2], Vector3d(0, 1, 0));
  EXPECT_EQ(c.points[3], Vector3d(1, 1, 0));
}

TEST(DepthToPointcloud, PitchScalesXY) {
  DepthGrid g(2, 2, 0.0);
  g.pitch_x = g.pitch_y = 0.5;
  const PointCloud c = depth_to_pointcloud(g);
  EXPECT_EQ(c.points[3], Vector3d(0.5, 0.5, 0));
}

TEST(DepthToPointcloud, HolesAreSkipped) {
  DepthGrid g(2, 2, 0.0);
  g.z.set_valid(1, 0, false);
  const PointCloud c = depth_to_pointcloud(g);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.source, (std::vector<int>{0, 2, 3}));
  EXPECT_NO_THROW(validate(c));
}

TEST(ApplyPose, Identity) {
  const PointCloud c = depth_to_pointcloud(testing::wavy_surface(5, 4));
  const PointCloud d = apply_pose(SimilarityPose::identity(), c);
  EXPECT_EQ(c.points, d.points);
}

TEST(ApplyPose, PureScale) {
  PointCloud c;
  c.points = {Vector3d(1, 1, 1)};
  EXPECT_EQ(apply_pose(SimilarityPose(2.0, Matrix3d::Identity(), Vector3d::Zero()), c).points[0],
            Vector3d(2, 2, 2));
}

TEST(ApplyPose, QuarterTurnAboutY) {
  PointCloud c;
  c.points = {Vector3d(0, 0, 1)};
  const SimilarityPose p = SimilarityPose::from_euler_deg(1.0, 0.0, 90.0, 0.0, Vector3d::Zero());
  EXPECT_LT((apply_pose(p, c).points[0] - Vector3d(1, 0, 0)).norm(), 1e-12);
}

TEST(ApplyPose, InverseRoundTrip) {
  std::mt19937_64 rng(5);
  const PointCloud c = depth_to_pointcloud(testing::wavy_surface(6, 6));
  for (int trial = 0; trial < 50; ++trial) {
    const SimilarityPose p = SimilarityPose::from_euler_deg(
        uniform(rng, 0.2, 5.0), uniform(rng, -180, 180), uniform(rng, -89, 89),
        uniform(rng, -180, 180), Vector3d(uniform(rng, -9, 9), uniform(rng, -9, 9), 0.3));
    const PointCloud back = apply_pose(p, apply_pose(p.inverse(), c));
    for (std::size_t i = 0; i < c.size(); ++i)
      EXPECT_LT((back.points[i] - c.points[i]).norm(), 1e-9);
    const Matrix3d r = p.rotation();
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
    EXPECT_LT((r.transpose() * r - Matrix3d::Identity()).norm(), 1e-9);
  }
}

TEST(SimilarityPose, RejectsNonPositiveScale) {
  EXPECT_THROW(SimilarityPose(0.0, Matrix3d::Identity(), Vector3d::Zero()), InvalidInput);
  EXPECT_THROW(SimilarityPose(1.0, -Matrix3d::Identity(), Vector3d::Zero()), InvalidInput);
}

TEST(RotateNormals, IdentityAndScaleLeaveNormalsAlone) {
  const NormalField n = depth_to_normals(testing::wavy_surface(8, 8));
  const NormalField a = rotate_normals(SimilarityPose::identity(), n);
  const NormalField b = rotate_normals(SimilarityPose(3.0, Matrix3d::Identity(), Vector3d(1, 2, 3)), n);
  for (std::size_t i = 0; i < n.size(); ++i) {
    EXPECT_LT((a[i] - n[i]).norm(), 1e-15);
    EXPECT_LT((b[i] - n[i]).norm(), 1e-15);
  }
}

TEST(RotateNormals, QuarterTurnAboutY) {
  NormalField n(1, 1, Vector3d::UnitZ());
  const NormalField r =
      rotate_normals(SimilarityPose::from_euler_deg(1.0, 0.0, 90.0, 0.0, Vector3d::Zero()), n);
  EXPECT_LT((r[0] - Vector3d::UnitX()).norm(), 1e-12);
}

TEST(RotateNormals, KeepsUnitLength) {
  std::mt19937_64 rng(3);
  NormalField n(10, 10);
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = random_normal(rng);
  const NormalField r =
      rotate_normals(SimilarityPose::from_euler_deg(1.0, 10.0, -12.0, 7.0, Vector3d::Zero()), n);
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i].norm(), 1.0, 1e-12);
}

TEST(Validate, RejectsBadGrids) {
  DepthGrid g(3, 3, 1.0);
  g.pitch_x = 0.0;
  EXPECT_THROW(validate(g), InvalidInput);
  DepthGrid h(3, 3, 1.0);
  h.z[4] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(validate(h), InvalidInput);
  NormalField n(2, 2, Vector3d(0, 0, 2));
  EXPECT_THROW(validate(n), InvalidInput);
  NormalField m(2, 2, Vector3d(0, 0, -1));
  EXPECT_THROW(validate(m), InvalidInput);
}

TEST(Grid2D, RejectsMismatchedStorage) {
  EXPECT_THROW(Grid2D<double>(2, 2, std::vector<double>(3), std::vector<std::uint8_t>(4)),
               InvalidInput);
}

}  // namespace
}  // namespace bimodal
