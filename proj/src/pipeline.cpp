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

#include "bimodal/pipeline.hpp"

#include <cmath>
#include <optional>

#include "bimodal/geometry.hpp"
#include "bimodal/integrate.hpp"

namespace bimodal {

void validate(const PipelineConfig& cfg) {
  if (!(cfg.threshold > 0.0)) throw InvalidInput("PipelineConfig: threshold must be > 0");
  if (cfg.max_iterations < 1) throw InvalidInput("PipelineConfig: max_iterations must be >= 1");
  if (cfg.target_upsampling < 1)
    throw InvalidInput("PipelineConfig: target_upsampling must be >= 1");
  if (cfg.divergence_patience < 1)
    throw InvalidInput("PipelineConfig: divergence_patience must be >= 1");
  validate(cfg.sfs);
  validate(cfg.refine);
  validate(cfg.registration.ransac);
}

PriorField build_priors(const CorrespondenceSet& corr, const NormalField& n_src,
                        const SimilarityPose& pose, int width, int height) {
  PriorField priors(width, height, Vector3d::Zero(), false);
  for (const auto& c : corr.pairs) {
    if (c.source_pixel < 0 || c.target_pixel < 0) continue;
    const auto h = static_cast<std::size_t>(c.source_pixel);
    const auto i = static_cast<std::size_t>(c.target_pixel);
    if (!n_src.valid(h)) continue;
    priors[i] += pose.rotate(n_src[h]);
    priors.set_valid(i, true);
  }
  for (std::size_t i = 0; i < priors.size(); ++i) {
    if (!priors.valid(i)) continue;
    const double len = priors[i].norm();
    if (len > 0.0 && priors[i].z() > 0.0) {
      priors[i] /= len;
    } else {
      priors.set_valid(i, false);
    }
  }
  return priors;
}

namespace {

struct State {
  NormalField normals;
  DepthGrid depth;
  SimilarityPose pose;
  DepthGrid refined_depth;
  NormalField refined_normals;
  CorrespondenceSet correspondences;
};

}  // namespace

PipelineResult run_bimodal_stereo(const LogShadingImage& shading, const DepthGrid& z_r,
                                  const ShLighting& lighting, const PipelineConfig& cfg) {
  validate(cfg);
  validate(z_r);
  if (shading.count_valid() < 4) throw InvalidInput("run_bimodal_stereo: shading nearly empty");

  const NormalField n_r = depth_to_normals(z_r);
  const PointCloud p_c = depth_to_pointcloud(z_r);

  PipelineResult result;
  std::vector<State> states;
  std::optional<SimilarityPose> previous;
  Matrix3d r_prev = Matrix3d::Identity();
  PriorField priors;
  int rising = 0;

  for (int k = 1; k <= cfg.max_iterations; ++k) {
    IterationRecord rec;
    rec.k = k;
    rec.priors = priors.empty() ? 0 : priors.count_valid();

    State st;
    const FieldSolution sfs = solve_field(shading, lighting, priors, cfg.sfs);
    st.normals = sfs.normals;
    rec.sfs_mean_residual = sfs.mean_objective;
    rec.sfs_nonconverged = sfs.nonconverged;

    const IntegrationResult integ = integrate_gradients(normals_to_gradients(st.normals),
                                                        z_r.pitch_x, z_r.pitch_y);
    st.depth = integ.depth;
    const SampledSurface p_star = sample_surface(st.depth, cfg.target_upsampling);

    RegistrationResult reg;
    try {
      reg = register_clouds(p_c, p_star.cloud, cfg.registration, previous, p_star.pixel);
    } catch (const Error& e) {
      throw PipelineFailure(std::string("iteration ") + std::to_string(k) + ": " + e.what(),
                            result.trace);
    }
    st.pose = reg.pose;
    rec.pose = reg.pose;
    rec.inliers = reg.inliers;
    rec.beta_deg = reg.pose.euler_deg()(1);
    rec.rot_delta = (reg.pose.rotation() - r_prev).norm();

    st.correspondences = extend_to_holes(reg.correspondences, z_r, reg.pose, p_star);
    const RefinedNormals refined =
        refine_normals(n_r, shading, lighting, reg.pose, st.correspondences, st.normals,
                       cfg.refine);
    st.refined_normals = refined.normals;
    st.refined_depth = refine_depth(refined.normals, refined.touched, z_r);

    result.trace.push_back(rec);
    states.push_back(std::move(st));

    if (k >= 2 && rec.rot_delta < cfg.threshold) {
      result.converged = true;
      break;
    }
    if (k >= 2 && rec.rot_delta > result.trace[result.trace.size() - 2].rot_delta) {
      if (++rising >= cfg.divergence_patience) {
        result.diverged = true;
        break;
      }
    } else {
      rising = 0;
    }

    const State& last = states.back();
    priors = build_priors(last.correspondences, cfg.literal_prior ? n_r : last.refined_normals,
                          last.pose, shading.width(), shading.height());
    previous = last.pose;
    r_prev = last.pose.rotation();
  }

  std::size_t pick = states.size() - 1;
  if (result.diverged) {
    for (std::size_t i = 0; i < result.trace.size(); ++i)
      if (result.trace[i].rot_delta < result.trace[pick].rot_delta) pick = i;
  }
  State& chosen = states[pick];
  result.selected = pick;
  result.normals = std::move(chosen.normals);
  result.depth = std::move(chosen.depth);
  result.pose = chosen.pose;
  result.refined_depth = std::move(chosen.refined_depth);
  result.refined_normals = std::move(chosen.refined_normals);
  result.correspondences = std::move(chosen.correspondences);
  return result;
}

}  // namespace bimodal
