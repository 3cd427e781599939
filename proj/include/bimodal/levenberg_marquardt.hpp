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

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace bimodal {

struct LmOptions {
  int max_iterations = 1000;
  // Stop when ||J^T r||_inf falls below this.
  double gradient_tolerance = 1e-15;
  // Stop when ||h|| <= step_tolerance * (||x|| + step_tolerance).
  double step_tolerance = 1e-15;
  // Stop when the sum of squared residuals falls below this.
  double cost_tolerance = 1e-30;
  double initial_damping = 1e-3;
};

struct LmSummary {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
};

/// Small dense Levenberg-Marquardt with gain-ratio damping control.
///
/// `Problem` must provide
///   void operator()(const Param& x, Residual& r, Jacobian* j) const
/// with Param = Matrix<Scalar, NP, 1>, Residual = Matrix<Scalar, NR, 1> and
/// Jacobian = Matrix<Scalar, NR, NP>. A step is accepted only when it lowers
/// the cost, so the returned x never has a higher cost than the start.
template <int NP, int NR, typename Problem, typename Scalar = double>
LmSummary levenberg_marquardt(const Problem& problem, Eigen::Matrix<Scalar, NP, 1>& x,
                              const LmOptions& options = {}) {
  using Param = Eigen::Matrix<Scalar, NP, 1>;
  using Residual = Eigen::Matrix<Scalar, NR, 1>;
  using Jacobian = Eigen::Matrix<Scalar, NR, NP>;
  using Normal = Eigen::Matrix<Scalar, NP, NP>;

  Residual r;
  Jacobian j;
  problem(x, r, &j);
  Scalar cost = r.squaredNorm();

  LmSummary summary;
  summary.initial_cost = static_cast<double>(cost);

  Normal a = j.transpose() * j;
  Param g = j.transpose() * r;
  Scalar mu = Scalar(options.initial_damping) * std::max(a.diagonal().maxCoeff(), Scalar(1e-12));
  Scalar nu = 2;

  Residual r_new;
  for (int it = 0; it < options.max_iterations; ++it) {
    summary.iterations = it + 1;
    if (cost <= Scalar(options.cost_tolerance) ||
        g.template lpNorm<Eigen::Infinity>() <= Scalar(options.gradient_tolerance)) {
      summary.converged = true;
      break;
    }
    const Param h = (a + mu * Normal::Identity()).ldlt().solve(-g);
    if (!h.allFinite()) break;
    if (h.norm() <= Scalar(options.step_tolerance) * (x.norm() + Scalar(options.step_tolerance))) {
      summary.converged = true;
      break;
    }
    const Param x_new = x + h;
    problem(x_new, r_new, nullptr);
    const Scalar cost_new = r_new.squaredNorm();
    // Predicted decrease of the linear model, 2 * h^T (mu h - g) for cost = ||r||^2.
    const Scalar predicted = h.dot(mu * h - g);
    const Scalar rho = predicted > 0 ? (cost - cost_new) / predicted : Scalar(-1);
    if (std::isfinite(static_cast<double>(cost_new)) && cost_new < cost && rho > 0) {
      x = x_new;
      problem(x, r, &j);
      cost = r.squaredNorm();
      a = j.transpose() * j;
      g = j.transpose() * r;
      const Scalar t = 2 * rho - 1;
      mu *= std::max(Scalar(1) / 3, Scalar(1) - t * t * t);
      nu = 2;
    } else {
      mu *= nu;
      nu *= 2;
      if (!std::isfinite(static_cast<double>(mu)) || mu > Scalar(1e30)) break;
    }
  }
  summary.final_cost = static_cast<double>(cost);
  return summary;
}

}  // namespace bimodal
