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

#include "bimodal/sh_lighting.hpp"

#include "bimodal/errors.hpp"

namespace bimodal {

namespace {

Matrix4d channel_matrix(const double* l) {
  // l[0..8] holds L_{j,1}..L_{j,9}.
  const double L1 = l[0], L2 = l[1], L3 = l[2], L4 = l[3], L5 = l[4], L6 = l[5], L7 = l[6],
               L8 = l[7], L9 = l[8];
  using namespace sh;
  Matrix4d m;
  m << c1 * L9, c1 * L5, c1 * L8, c2 * L4,
       c1 * L5, -c1 * L9, c1 * L6, c2 * L2,
       c1 * L8, c1 * L6, c3 * L7, c2 * L3,
       c2 * L4, c2 * L2, c2 * L3, c4 * L1 - c5 * L7;
  return m;
}

}  // namespace

ShLighting::ShLighting() : ShLighting(ShVector::Zero()) {}

ShLighting::ShLighting(const ShVector& coefficients) : coefficients_(coefficients) {
  if (!coefficients.allFinite()) throw InvalidInput("ShLighting: non-finite coefficient");
  for (int j = 0; j < sh::kChannels; ++j)
    m_[static_cast<std::size_t>(j)] =
        channel_matrix(coefficients_.data() + j * sh::kCoefficientsPerChannel);
}

ShLighting build_m_matrices(const ShVector& coefficients) { return ShLighting(coefficients); }

LogShadingImage render_log_shading(const ShLighting& lighting, const NormalField& normals) {
  LogShadingImage out(normals.width(), normals.height(), Vector3d::Zero(), false);
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (!normals.valid(i)) continue;
    out[i] = lighting.shade(normals[i]);
    out.set_valid(i, true);
  }
  return out;
}

double lighting_prior_cost(const LightingPrior& prior, const Eigen::VectorXd& coefficients) {
  const auto n = coefficients.size();
  if (prior.mean.size() != n || prior.precision.rows() != n || prior.precision.cols() != n)
    throw InvalidInput("lighting_prior_cost: dimension mismatch");
  if (prior.weight < 0.0) throw InvalidInput("lighting_prior_cost: negative weight");
  if ((prior.precision - prior.precision.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw InvalidInput("lighting_prior_cost: precision is not symmetric");
  if (prior.weight == 0.0) return 0.0;
  const Eigen::VectorXd d = coefficients - prior.mean;
  return prior.weight * d.dot(prior.precision * d);
}

}  // namespace bimodal
