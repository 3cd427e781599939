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

#include "bimodal/integrate.hpp"

#include <numeric>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "bimodal/errors.hpp"
#include "bimodal/geometry.hpp"

namespace bimodal {

GradientField normals_to_gradients(const NormalField& normals, double min_n3) {
  GradientField out(normals.width(), normals.height(), Vector2d::Zero(), false);
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (!normals.valid(i)) continue;
    const Vector3d& n = normals[i];
    if (!(n.z() >= min_n3)) continue;
    out[i] = Vector2d(-n.x() / n.z(), -n.y() / n.z());
    out.set_valid(i, true);
  }
  return out;
}

namespace {

struct Equation {
  int lo;  // unknown ids
  int hi;
  double inv_span;
  double rhs;
};

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int a) {
    while (parent_[static_cast<std::size_t>(a)] != a) {
      auto& p = parent_[static_cast<std::size_t>(a)];
      p = parent_[static_cast<std::size_t>(p)];
      a = p;
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

IntegrationResult integrate_gradients(const GradientField& grads, double pitch_x, double pitch_y) {
  if (!(pitch_x > 0.0) || !(pitch_y > 0.0))
    throw InvalidInput("integrate_gradients: pitch must be positive");
  const int w = grads.width();
  const int h = grads.height();

  std::vector<int> unknown(grads.size(), -1);
  std::vector<std::size_t> pixel_of;
  auto id = [&](int x, int y) {
    const std::size_t i = grads.index(x, y);
    if (unknown[i] < 0) {
      unknown[i] = static_cast<int>(pixel_of.size());
      pixel_of.push_back(i);
    }
    return unknown[i];
  };

  std::vector<Equation> eqs;
  for (int y = 0; y < h; ++y) {
    const auto sy = axis_stencil(y, h);
    for (int x = 0; x < w; ++x) {
      if (!grads.valid(x, y)) continue;
      const Vector2d& g = grads(x, y);
      if (!g.allFinite()) throw InvalidInput("integrate_gradients: non-finite gradient");
      if (const auto sx = axis_stencil(x, w))
        eqs.push_back({id(sx->lo, y), id(sx->hi, y), 1.0 / (sx->span * pitch_x), g.x()});
      if (sy) eqs.push_back({id(x, sy->lo), id(x, sy->hi), 1.0 / (sy->span * pitch_y), g.y()});
    }
  }

  IntegrationResult result;
  result.depth = DepthGrid(w, h, 0.0, false);
  result.depth.pitch_x = pitch_x;
  result.depth.pitch_y = pitch_y;
  result.component = Grid2D<int>(w, h, -1, false);

  const int n = static_cast<int>(pixel_of.size());
  if (n == 0) return result;

  DisjointSets sets(n);
  for (const auto& e : eqs) sets.unite(e.lo, e.hi);
  std::vector<int> comp(static_cast<std::size_t>(n));
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  std::vector<int> anchors;
  for (int u = 0; u < n; ++u) {
    const int root = sets.find(u);
    if (label[static_cast<std::size_t>(root)] < 0) {
      label[static_cast<std::size_t>(root)] = static_cast<int>(anchors.size());
      anchors.push_back(u);
    }
    comp[static_cast<std::size_t>(u)] = label[static_cast<std::size_t>(root)];
  }
  result.components = static_cast<int>(anchors.size());

  using SpMat = Eigen::SparseMatrix<double>;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(eqs.size() * 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(eqs.size()));
  for (std::size_t k = 0; k < eqs.size(); ++k) {
    const auto r = static_cast<int>(k);
    trip.emplace_back(r, eqs[k].hi, eqs[k].inv_span);
    trip.emplace_back(r, eqs[k].lo, -eqs[k].inv_span);
    b(r) = eqs[k].rhs;
  }
  SpMat a(static_cast<Eigen::Index>(eqs.size()), n);
  a.setFromTriplets(trip.begin(), trip.end());

  const SpMat at = a.transpose();
  SpMat normal = at * a;
  // One unit penalty per component removes the constant null space without
  // changing the least-squares part of the solution.
  for (int anchor : anchors) normal.coeffRef(anchor, anchor) += 1.0;
  const Eigen::VectorXd rhs = at * b;

  Eigen::SimplicialLDLT<SpMat> solver(normal);
  if (solver.info() != Eigen::Success) throw SolverError("integrate_gradients: factorization failed");
  Eigen::VectorXd z = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !z.allFinite())
    throw SolverError("integrate_gradients: solve failed");

  std::vector<double> sum(anchors.size(), 0.0);
  std::vector<int> count(anchors.size(), 0);
  for (int u = 0; u < n; ++u) {
    sum[static_cast<std::size_t>(comp[static_cast<std::size_t>(u)])] += z(u);
    ++count[static_cast<std::size_t>(comp[static_cast<std::size_t>(u)])];
  }
  for (int u = 0; u < n; ++u) {
    const auto c = static_cast<std::size_t>(comp[static_cast<std::size_t>(u)]);
    z(u) -= sum[c] / count[c];
  }

  const Eigen::VectorXd resid = a * z - b;
  const double rhs_norm = rhs.norm();
  result.relative_residual = rhs_norm > 0.0 ? (at * resid).norm() / rhs_norm : (at * resid).norm();
  result.rms_residual =
      eqs.empty() ? 0.0 : std::sqrt(resid.squaredNorm() / static_cast<double>(eqs.size()));
  if (!(result.relative_residual <= 1e-8))
    throw SolverError("integrate_gradients: relative residual " +
                      std::to_string(result.relative_residual) + " above 1e-8");

  for (int u = 0; u < n; ++u) {
    const std::size_t i = pixel_of[static_cast<std::size_t>(u)];
    result.depth.z[i] = z(u);
    result.depth.z.set_valid(i, true);
    result.component[i] = comp[static_cast<std::size_t>(u)];
    result.component.set_valid(i, true);
  }
  return result;
}

}  // namespace bimodal
