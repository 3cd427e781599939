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

#include "bimodal/sfs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "bimodal/errors.hpp"
#include "bimodal/levenberg_marquardt.hpp"

namespace bimodal {

void validate(const SfsConfig& cfg) {
  if (!(cfg.lambda_prior >= 0.0)) throw InvalidInput("SfsConfig: lambda_prior must be >= 0");
  if (!(cfg.lambda_norm > 0.0)) throw InvalidInput("SfsConfig: lambda_norm must be > 0");
  if (cfg.max_iterations < 1) throw InvalidInput("SfsConfig: max_iterations must be >= 1");
  if (cfg.restarts < 0) throw InvalidInput("SfsConfig: restarts must be >= 0");
}

PixelProblem::PixelProblem(const ShLighting& lighting_, const Vector3d& log_shading_,
                           std::optional<Vector3d> prior_, double lambda_prior,
                           double lambda_norm, const Matrix3d& to_shading_)
    : lighting(&lighting_),
      log_shading(log_shading_),
      prior(std::move(prior_)),
      sqrt_prior(std::sqrt(lambda_prior)),
      sqrt_norm(std::sqrt(lambda_norm)),
      to_shading(to_shading_) {}

void PixelProblem::operator()(const Vector3d& n, SfsResiduals& r, SfsJacobian* j) const {
  const Vector3d ns = to_shading * n;
  for (int c = 0; c < 3; ++c) r(c) = log_shading(c) - lighting->shade(c, ns);
  if (prior) {
    r.segment<3>(3) = sqrt_prior * (n - *prior);
  } else {
    r.segment<3>(3).setZero();
  }
  r(6) = sqrt_norm * (n.squaredNorm() - 1.0);

  if (j == nullptr) return;
  for (int c = 0; c < 3; ++c)
    j->row(c) = -(to_shading.transpose() * lighting->shade_gradient(c, ns)).transpose();
  j->block<3, 3>(3, 0) = prior ? Matrix3d(sqrt_prior * Matrix3d::Identity()) : Matrix3d::Zero();
  j->row(6) = 2.0 * sqrt_norm * n.transpose();
}

SfsResiduals PixelProblem::residuals(const Vector3d& n) const {
  SfsResiduals r;
  (*this)(n, r, nullptr);
  return r;
}

SfsResiduals sfs_residuals(const Vector3d& n, const Vector3d& log_shading,
                           const ShLighting& lighting, const std::optional<Vector3d>& prior,
                           const SfsConfig& cfg) {
  return PixelProblem(lighting, log_shading, prior, cfg.lambda_prior, cfg.lambda_norm)
      .residuals(n);
}

namespace {

// Brightness and prior residuals over the unit sphere, parametrized around a
// base direction: n(a, b) = normalize(u + a e1 + b e2).
struct SphereProblem {
  const PixelProblem* base;
  Vector3d u, e1, e2;

  explicit SphereProblem(const PixelProblem& p, const Vector3d& unit) : base(&p), u(unit) {
    const Vector3d helper = std::abs(u.x()) < 0.9 ? Vector3d::UnitX() : Vector3d::UnitY();
    e1 = u.cross(helper).normalized();
    e2 = u.cross(e1);
  }

  Vector3d point(const Eigen::Vector2d& ab) const {
    return (u + ab(0) * e1 + ab(1) * e2).normalized();
  }

  void operator()(const Eigen::Vector2d& ab, Eigen::Matrix<double, 6, 1>& r,
                  Eigen::Matrix<double, 6, 2>* j) const {
    const Vector3d v = u + ab(0) * e1 + ab(1) * e2;
    const double len = v.norm();
    const Vector3d n = v / len;
    SfsResiduals full;
    SfsJacobian jn;
    (*base)(n, full, j ? &jn : nullptr);
    r = full.head<6>();
    if (j == nullptr) return;
    Eigen::Matrix<double, 3, 2> basis;
    basis << e1, e2;
    const Eigen::Matrix<double, 3, 2> dn = (Matrix3d::Identity() - n * n.transpose()) * basis / len;
    *j = jn.topRows<6>() * dn;
  }
};

struct Candidate {
  Vector3d normal;
  double objective;
};

Candidate descend(const PixelProblem& problem, const SfsConfig& cfg, const Vector3d& start,
                  int& iterations, bool& converged) {
  LmOptions opts;
  opts.max_iterations = cfg.max_iterations;
  Vector3d x = start;
  const LmSummary s1 = levenberg_marquardt<3, 7>(problem, x, opts);
  iterations += s1.iterations;

  Vector3d n = x.norm() > 1e-12 ? Vector3d(x.normalized()) : Vector3d(start.normalized());
  SphereProblem sphere(problem, n);
  Eigen::Vector2d ab = Eigen::Vector2d::Zero();
  const LmSummary s2 = levenberg_marquardt<2, 6>(sphere, ab, opts);
  iterations += s2.iterations;
  n = sphere.point(ab);
  const double obj = problem.objective(n);
  converged = (s1.converged && s2.converged) || obj <= cfg.residual_tolerance;
  return {n, obj};
}

// Deterministic, roughly uniform seeds on the camera-facing hemisphere.
const std::vector<Vector3d>& hemisphere_seeds(int count) {
  thread_local std::vector<Vector3d> cache;
  thread_local int cached = -1;
  if (cached == count) return cache;
  cache.clear();
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (i + 0.5) / count * 0.95;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    cache.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  cached = count;
  return cache;
}

bool better(const Candidate& a, const Candidate& b) {
  const bool fa = a.normal.z() >= 0.0;
  const bool fb = b.normal.z() >= 0.0;
  if (fa != fb) return fa;
  return a.objective < b.objective;
}

}  // namespace

PixelSolution solve_pixel(const PixelProblem& problem, const SfsConfig& cfg, const Vector3d& init) {
  if (!init.allFinite() || init.norm() == 0.0)
    throw InvalidInput("solve_pixel: init must be finite and nonzero");

  PixelSolution out;
  bool converged = false;
  Candidate best = descend(problem, cfg, init, out.iterations, converged);

  if (!problem.prior && best.objective > cfg.residual_tolerance) {
    for (const Vector3d& seed : hemisphere_seeds(cfg.restarts)) {
      bool c = false;
      const Candidate cand = descend(problem, cfg, seed, out.iterations, c);
      if (better(cand, best)) {
        best = cand;
        converged = c;
      }
      if (best.normal.z() >= 0.0 && best.objective <= cfg.residual_tolerance) break;
    }
  }

  if (best.normal.z() < 0.0) {
    best.normal = -best.normal;
    best.objective = problem.objective(best.normal);
  }

  const Vector3d start = init.normalized();
  if (start.z() >= 0.0) {
    const double start_obj = problem.objective(start);
    if (start_obj < best.objective) best = {start, start_obj};
  }

  out.normal = best.normal;
  out.objective = best.objective;
  out.converged = converged || best.objective <= cfg.residual_tolerance;
  return out;
}

PixelSolution solve_pixel(const Vector3d& log_shading, const ShLighting& lighting,
                          const std::optional<Vector3d>& prior, const SfsConfig& cfg,
                          const Vector3d& init) {
  validate(cfg);
  return solve_pixel(PixelProblem(lighting, log_shading, prior, cfg.lambda_prior, cfg.lambda_norm),
                     cfg, init);
}

FieldSolution solve_field(const LogShadingImage& shading, const ShLighting& lighting,
                          const PriorField& priors, const SfsConfig& cfg) {
  validate(cfg);
  const bool has_priors = !priors.empty();
  if (has_priors && !priors.same_shape(shading))
    throw InvalidInput("solve_field: prior field and shading differ in size");
  if (!cfg.prior_mask.empty() && cfg.prior_mask.size() != shading.size())
    throw InvalidInput("solve_field: prior mask and shading differ in size");

  FieldSolution out;
  out.normals = NormalField(shading.width(), shading.height(), Vector3d::UnitZ(), false);
  out.objective = Grid2D<double>(shading.width(), shading.height(), 0.0, false);
  std::vector<std::uint8_t> failed(shading.size(), 0);

  auto solve_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      if (!shading.valid(i)) continue;
      std::optional<Vector3d> prior;
      if (has_priors && priors.valid(i) && (cfg.prior_mask.empty() || cfg.prior_mask[i]))
        prior = priors[i];
      const PixelProblem problem(lighting, shading[i], prior, cfg.lambda_prior, cfg.lambda_norm);
      const PixelSolution sol = solve_pixel(problem, cfg, prior ? *prior : Vector3d::UnitZ());
      out.normals[i] = sol.normal;
      out.normals.set_valid(i, true);
      out.objective[i] = sol.objective;
      out.objective.set_valid(i, true);
      failed[i] = sol.converged ? 0 : 1;
    }
  };

  const std::size_t n = shading.size();
  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    solve_range(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(solve_range, t * chunk, std::min(n, (t + 1) * chunk));
  }

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.objective.valid(i)) continue;
    sum += out.objective[i];
    ++count;
    out.nonconverged += failed[i];
  }
  out.mean_objective = count ? sum / static_cast<double>(count) : 0.0;
  return out;
}

}  // namespace bimodal
