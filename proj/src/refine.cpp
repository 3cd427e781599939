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

#include "bimodal/refine.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "bimodal/errors.hpp"
#include "bimodal/geometry.hpp"
#include "bimodal/integrate.hpp"
#include "bimodal/kdtree.hpp"
#include "bimodal/sfs.hpp"

namespace bimodal {

void validate(const RefineConfig& cfg) {
  if (!(cfg.lambda_prior >= 0.0)) throw InvalidInput("RefineConfig: lambda_prior must be >= 0");
  if (!(cfg.lambda_norm > 0.0)) throw InvalidInput("RefineConfig: lambda_norm must be > 0");
  if (cfg.max_iterations < 1) throw InvalidInput("RefineConfig: max_iterations must be >= 1");
  if (cfg.restarts < 0) throw InvalidInput("RefineConfig: restarts must be >= 0");
}

CorrespondenceSet extend_to_holes(const CorrespondenceSet& corr, const DepthGrid& depth,
                                  const SimilarityPose& pose, const SampledSurface& target) {
  CorrespondenceSet out = corr;
  if (corr.empty() || target.cloud.size() == 0) return out;
  const auto& z = depth.z;
  Mask matched(z.size(), 0);
  for (const auto& c : corr.pairs)
    if (c.source_pixel >= 0) matched[static_cast<std::size_t>(c.source_pixel)] = 1;

  const KdTree3 tree(target.cloud.points);
  const int dx[4] = {1, -1, 0, 0};
  const int dy[4] = {0, 0, 1, -1};
  for (int y = 0; y < z.height(); ++y) {
    for (int x = 0; x < z.width(); ++x) {
      if (z.valid(x, y)) continue;
      int hits = 0, valid = 0;
      double sum = 0.0;
      for (int k = 0; k < 4; ++k) {
        const int nx = x + dx[k], ny = y + dy[k];
        if (!z.in_bounds(nx, ny) || !z.valid(nx, ny)) continue;
        sum += z(nx, ny);
        ++valid;
        hits += matched[z.index(nx, ny)];
      }
      if (hits < 2) continue;
      const Vector3d p(x * depth.pitch_x, y * depth.pitch_y, sum / valid);
      const auto hit = tree.nearest(pose.apply(p));
      const double d = std::sqrt(hit.distance2);
      if (!(d < corr.threshold)) continue;
      Correspondence c;
      c.target = hit.index;
      c.source_pixel = static_cast<int>(z.index(x, y));
      c.target_pixel = target.pixel[static_cast<std::size_t>(hit.index)];
      c.distance = d;
      out.pairs.push_back(c);
    }
  }
  return out;
}

RefinedNormals refine_normals(const NormalField& n_r, const LogShadingImage& shading,
                              const ShLighting& lighting, const SimilarityPose& pose,
                              const CorrespondenceSet& corr, const NormalField& n_est,
                              const RefineConfig& cfg) {
  validate(cfg);
  if (!n_est.same_shape(shading))
    throw InvalidInput("refine_normals: estimated normals and shading differ in size");

  RefinedNormals out;
  out.normals = n_r;
  out.touched.assign(n_r.size(), 0);

  SfsConfig sfs;
  sfs.lambda_prior = cfg.lambda_prior;
  sfs.lambda_norm = cfg.lambda_norm;
  sfs.max_iterations = cfg.max_iterations;
  sfs.residual_tolerance = cfg.residual_tolerance;
  sfs.restarts = cfg.restarts;
  const Matrix3d& r = pose.rotation();

  struct Job {
    std::size_t h;
    std::size_t i;
  };
  std::vector<Job> jobs;
  for (const auto& c : corr.pairs) {
    if (c.source_pixel < 0 || c.target_pixel < 0) continue;
    const auto h = static_cast<std::size_t>(c.source_pixel);
    const auto i = static_cast<std::size_t>(c.target_pixel);
    if (h >= n_r.size() || i >= shading.size())
      throw InvalidInput("refine_normals: correspondence outside the grids");
    if (!shading.valid(i)) continue;
    if (!n_r.valid(h) && !n_est.valid(i)) continue;
    jobs.push_back({h, i});
  }

  std::vector<Vector3d> solved(jobs.size());
  std::vector<std::uint8_t> failed(jobs.size(), 0);
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto [h, i] = jobs[k];
      std::optional<Vector3d> prior;
      if (n_est.valid(i)) prior = (r.transpose() * n_est[i]).normalized();
      const PixelProblem problem(lighting, shading[i], prior, cfg.lambda_prior, cfg.lambda_norm,
                                 r);
      const bool from_input = n_r.valid(h);
      const Vector3d init = from_input ? n_r[h] : *prior;
      const PixelSolution sol = solve_pixel(problem, sfs, init);
      Vector3d n = sol.normal.normalized();
      if (from_input && problem.brightness_cost(n) > problem.brightness_cost(init)) n = init;
      solved[k] = n;
      failed[k] = sol.converged ? 0 : 1;
    }
  };

  const unsigned threads =
      std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(jobs.size())));
  if (threads <= 1) {
    run(0, jobs.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (jobs.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(run, std::min(jobs.size(), t * chunk),
                        std::min(jobs.size(), (t + 1) * chunk));
  }

  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const Vector3d& n = solved[k];
    // A depth-frame normal must face the depth camera.
    if (!(n.z() > 0.0)) continue;
    out.normals[jobs[k].h] = n;
    out.normals.set_valid(jobs[k].h, true);
    out.touched[jobs[k].h] = 1;
    out.nonconverged += failed[k];
  }
  return out;
}

DepthGrid refine_depth(const NormalField& refined, const Mask& touched, const DepthGrid& depth) {
  if (refined.width() != depth.width() || refined.height() != depth.height() ||
      touched.size() != refined.size())
    throw InvalidInput("refine_depth: normals, mask and depth differ in size");

  DepthGrid out = depth;
  NormalField overlap(refined.width(), refined.height(), Vector3d::UnitZ(), false);
  std::size_t count = 0;
  for (std::size_t i = 0; i < refined.size(); ++i) {
    if (!touched[i] || !refined.valid(i)) continue;
    overlap[i] = refined[i];
    overlap.set_valid(i, true);
    ++count;
  }
  if (count == 0) return out;

  const GradientField grads = normals_to_gradients(overlap);
  if (grads.count_valid() == 0) return out;
  const IntegrationResult integ = integrate_gradients(grads, depth.pitch_x, depth.pitch_y);

  std::vector<double> offset_sum(static_cast<std::size_t>(integ.components), 0.0);
  std::vector<std::size_t> offset_n(static_cast<std::size_t>(integ.components), 0);
  for (std::size_t i = 0; i < refined.size(); ++i) {
    const int c = integ.component[i];
    if (c < 0 || !touched[i] || !depth.z.valid(i)) continue;
    offset_sum[static_cast<std::size_t>(c)] += depth.z[i] - integ.depth.z[i];
    ++offset_n[static_cast<std::size_t>(c)];
  }
  for (std::size_t i = 0; i < refined.size(); ++i) {
    const int c = integ.component[i];
    if (c < 0 || !touched[i] || offset_n[static_cast<std::size_t>(c)] == 0) continue;
    out.z[i] = integ.depth.z[i] + offset_sum[static_cast<std::size_t>(c)] /
                                      static_cast<double>(offset_n[static_cast<std::size_t>(c)]);
    out.z.set_valid(i, true);
  }
  return out;
}

double forward_rmse(const NormalField& normals, const LogShadingImage& shading,
                    const ShLighting& lighting, const SimilarityPose& pose,
                    const CorrespondenceSet& corr) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : corr.pairs) {
    if (c.source_pixel < 0 || c.target_pixel < 0) continue;
    const auto h = static_cast<std::size_t>(c.source_pixel);
    const auto i = static_cast<std::size_t>(c.target_pixel);
    if (!normals.valid(h) || !shading.valid(i)) continue;
    sum += (shading[i] - lighting.shade(pose.rotate(normals[h]))).squaredNorm();
    n += 3;
  }
  return n ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
}

}  // namespace bimodal
