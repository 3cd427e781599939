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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "bimodal/geometry.hpp"
#include "bimodal/registration.hpp"
#include "bimodal/synthgen.hpp"
#include "test_util.hpp"

namespace bimodal {
namespace {

SynthSpec standard(double beta, double overlap) {
  SynthSpec s;
  s.source = face_surface();
  s.lighting = default_lighting();
  s.beta_deg = beta;
  s.overlap = overlap;
  return s;
}

// Bilinear height of the source at a continuous (x, y), or NaN outside.
double height_at(const DepthGrid& g, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  if (x0 < 0 || y0 < 0 || x0 + 1 >= g.width() || y0 + 1 >= g.height()) return std::nan("");
  const double fx = x - x0, fy = y - y0;
  return (1 - fx) * (1 - fy) * g.z(x0, y0) + fx * (1 - fy) * g.z(x0 + 1, y0) +
         (1 - fx) * fy * g.z(x0, y0 + 1) + fx * fy * g.z(x0 + 1, y0 + 1);
}

TEST(FaceSurface, ShapeAndRelief) {
  const DepthGrid g = face_surface();
  EXPECT_EQ(g.width(), 32);
  EXPECT_EQ(g.z.count_valid(), 1024u);
  const auto [lo, hi] = std::minmax_element(g.z.values().begin(), g.z.values().end());
  EXPECT_GT(*hi - *lo, 5.0);
  EXPECT_NO_THROW(validate(depth_to_normals(g)));
}

TEST(SynthesizePair, ZeroRotationReproducesSource) {
  const SynthPair p = synthesize_pair(standard(0.0, 1.0));
  ASSERT_EQ(p.depth.width(), 32);
  ASSERT_EQ(p.depth.height(), 32);
  for (std::size_t i = 0; i < p.depth.z.size(); ++i) {
    ASSERT_TRUE(p.depth.z.valid(i));
    EXPECT_NEAR(p.depth.z[i] + p.pose.translation().z(), face_surface().z[i], 1e-9);
  }
}

TEST(SynthesizePair, ShadingRenderedFromSourceNormals) {
  const SynthSpec spec = standard(20.0, 1.0);
  const SynthPair p = synthesize_pair(spec);
  const NormalField n = depth_to_normals(spec.source);
  const LogShadingImage expected = render_log_shading(spec.lighting, n);
  for (std::size_t i = 0; i < n.size(); ++i) {
    EXPECT_EQ(p.shading[i], expected[i]);
    EXPECT_EQ(p.normals[i], n[i]);
  }
}

TEST(SynthesizePair, PoseCarriesDepthOntoSource) {
  for (double beta : {20.0, 40.0}) {
    const SynthSpec spec = standard(beta, 0.5);
    const SynthPair p = synthesize_pair(spec);
    const PointCloud moved = apply_pose(p.pose, depth_to_pointcloud(p.depth));
    int checked = 0;
    for (const auto& q : moved.points) {
      const double h = height_at(spec.source, q.x(), q.y());
      if (std::isnan(h)) continue;
      // Rasterization samples a piecewise-linear surface, so the gap is small
      // but not zero against the bilinear patch.
      EXPECT_NEAR(q.z(), h, 0.5);
      ++checked;
    }
    EXPECT_GT(checked, static_cast<int>(moved.size() / 2));
    EXPECT_NEAR(p.pose.euler_deg()(1), beta, 1e-9);
  }
}

TEST(SynthesizePair, QuarterOverlapArea) {
  const SynthPair p = synthesize_pair(standard(0.0, 0.25));
  const double frac = static_cast<double>(p.depth.z.count_valid()) / p.footprint;
  EXPECT_NEAR(frac, 0.25, 0.01 * 0.25);
}

TEST(SynthesizePair, StripIsClosestColumnWindow) {
  for (double beta : {20.0, 40.0, 90.0})
    for (double pw : {0.125, 0.25, 0.5}) {
      const SynthPair full = synthesize_pair(standard(beta, 1.0));
      const SynthPair p = synthesize_pair(standard(beta, pw));
      std::size_t tallest = 0;
      for (int x = 0; x < full.depth.width(); ++x) {
        std::size_t c = 0;
        for (int y = 0; y < full.depth.height(); ++y) c += full.depth.z.valid(x, y);
        tallest = std::max(tallest, c);
      }
      const double target = pw * static_cast<double>(p.footprint);
      EXPECT_LE(std::abs(static_cast<double>(p.depth.z.count_valid()) - target), tallest)
          << beta << " " << pw;
    }
}

TEST(SynthesizePair, StrideSubsamples) {
  SynthSpec spec = standard(20.0, 1.0);
  const SynthPair a = synthesize_pair(spec);
  spec.stride = 2;
  const SynthPair b = synthesize_pair(spec);
  EXPECT_EQ(b.depth.width(), (a.depth.width() + 1) / 2);
  EXPECT_EQ(b.depth.pitch_x, 2.0);
  for (int y = 0; y < b.depth.height(); ++y)
    for (int x = 0; x < b.depth.width(); ++x)
      if (b.depth.z.valid(x, y)) EXPECT_EQ(b.depth.z(x, y), a.depth.z(2 * x, 2 * y));
}

TEST(SynthesizePair, NoiseFollowsSeed) {
  SynthSpec spec = standard(20.0, 1.0);
  spec.depth_noise = 0.1;
  spec.seed = 5;
  const SynthPair a = synthesize_pair(spec);
  const SynthPair b = synthesize_pair(spec);
  spec.seed = 6;
  const SynthPair c = synthesize_pair(spec);
  EXPECT_EQ(a.depth.z.values()[100], b.depth.z.values()[100]);
  EXPECT_NE(a.depth.z.values()[100], c.depth.z.values()[100]);
}

TEST(SynthesizePair, RejectsBadSpecs) {
  EXPECT_THROW(synthesize_pair(standard(20.0, 0.0)), InvalidInput);
  EXPECT_THROW(synthesize_pair(standard(20.0, 1.5)), InvalidInput);
  SynthSpec s = standard(std::nan(""), 1.0);
  EXPECT_THROW(synthesize_pair(s), InvalidInput);
  s = standard(20.0, 1.0);
  s.stride = 0;
  EXPECT_THROW(synthesize_pair(s), InvalidInput);
  s = standard(20.0, 1.0);
  s.prior_percentage = 1.5;
  EXPECT_THROW(synthesize_pair(s), InvalidInput);
}

TEST(SelectPriorPixels, EndPointsAndDeterminism) {
  const Mask mask(100, 1);
  const Mask none = select_prior_pixels(mask, 0.0, 1);
  EXPECT_EQ(std::count(none.begin(), none.end(), 1), 0);
  const Mask all = select_prior_pixels(mask, 1.0, 1);
  EXPECT_EQ(std::count(all.begin(), all.end(), 1), 100);
  EXPECT_EQ(select_prior_pixels(mask, 0.5, 3), select_prior_pixels(mask, 0.5, 3));
  const Mask half = select_prior_pixels(mask, 0.5, 3);
  EXPECT_EQ(std::count(half.begin(), half.end(), 1), 50);
}

TEST(SelectPriorPixels, NestedAndInsideMask) {
  Mask mask(200, 0);
  for (std::size_t i = 0; i < mask.size(); i += 3) mask[i] = 1;
  Mask prev(mask.size(), 0);
  for (double per : {0.1, 0.25, 0.5, 0.75, 1.0}) {
    const Mask m = select_prior_pixels(mask, per, 17);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i]) EXPECT_TRUE(mask[i]);
      if (prev[i]) EXPECT_TRUE(m[i]);
    }
    prev = m;
  }
}

TEST(RunSweep, OrderOfMagnitudeAtTwentyDegrees) {
  SweepConfig cfg;
  const SweepTable t = run_sweep(face_surface(), default_lighting(), {20.0}, {0.5}, cfg);
  ASSERT_EQ(t.cells.size(), 1u);
  ASSERT_FALSE(t.at(0, 0).failed) << t.at(0, 0).message;
  // Reported cell: 0.006005. Same order of magnitude.
  EXPECT_GT(t.at(0, 0).error, 6e-4);
  EXPECT_LT(t.at(0, 0).error, 6e-2);
}

TEST(CellSeed, DistinctPerCell) {
  EXPECT_NE(cell_seed(0, 20.0, 0.5), cell_seed(0, 40.0, 0.5));
  EXPECT_NE(cell_seed(0, 20.0, 0.5), cell_seed(0, 20.0, 1.0));
  EXPECT_NE(cell_seed(0, 20.0, 0.5), cell_seed(1, 20.0, 0.5));
  EXPECT_EQ(cell_seed(9, 20.0, 0.5), cell_seed(9, 20.0, 0.5));
}

}  // namespace
}  // namespace bimodal
