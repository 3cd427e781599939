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

#include "bimodal/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "bimodal/errors.hpp"
#include "bimodal/kdtree.hpp"
#include "bimodal/levenberg_marquardt.hpp"
#include "bimodal/random.hpp"

namespace bimodal {

namespace {

Vector3d centroid(std::span<const Vector3d> pts) {
  Vector3d c = Vector3d::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

// Eigenvectors of the scatter matrix, ascending eigenvalue order.
Matrix3d principal_axes(std::span<const Vector3d> pts, const Vector3d& c) {
  Matrix3d cov = Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
  return Eigen::SelfAdjointEigenSolver<Matrix3d>(cov).eigenvectors();
}

double rms_radius(std::span<const Vector3d> pts, const Vector3d& c) {
  double s = 0.0;
  for (const auto& p : pts) s += (p - c).squaredNorm();
  return std::sqrt(s / static_cast<double>(pts.size()));
}

void check_cloud(const PointCloud& cloud, const char* what) {
  if (cloud.size() < 4)
    throw DegenerateSample(std::string("icp_align: ") + what + " has fewer than 4 points");
  const Vector3d c = centroid(cloud.points);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : cloud.points) cov += (p - c) * (p - c).transpose();
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3d>(cov).singularValues();
  if (!(sv(1) > 1e-12 * sv(0)))
    throw DegenerateSample(std::string("icp_align: ") + what + " is collinear");
}

struct NearestSet {
  std::vector<Vector3d> matched;
  // Mean squared distance divided by the scale (see similarity_fit).
  double objective = 0.0;
};

NearestSet match(const KdTree3& tree, const PointCloud& target, const PointCloud& source,
                 const SimilarityPose& pose) {
  NearestSet out;
  out.matched.resize(source.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto hit = tree.nearest(pose.apply(source.points[i]));
    out.matched[i] = target.points[static_cast<std::size_t>(hit.index)];
    sum += hit.distance2;
  }
  out.objective = sum / static_cast<double>(source.size()) / pose.scale();
  return out;
}

// Rotation from the SVD of the cross-covariance; scale from the ratio of the
// RMS spreads of the matched sets, which treats both sides alike and does not
// shrink toward zero the way the one-sided least-squares scale does on noisy
// matches.
std::optional<SimilarityPose> similarity_fit(const PointCloud& source,
                                             const std::vector<Vector3d>& matched) {
  const Vector3d cy = centroid(source.points);
  const Vector3d cx = centroid(matched);
  Matrix3d cov = Matrix3d::Zero();
  double sy = 0.0, sx = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Vector3d a = source.points[i] - cy;
    const Vector3d b = matched[i] - cx;
    cov += b * a.transpose();
    sy += a.squaredNorm();
    sx += b.squaredNorm();
  }
  if (!(sy > 0.0) || !(sx > 0.0)) return std::nullopt;
  const Eigen::JacobiSVD<Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d d = Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Matrix3d r = svd.matrixU() * d * svd.matrixV().transpose();
  const double s = std::sqrt(sx / sy);
  if (!r.allFinite() || !std::isfinite(s)) return std::nullopt;
  return SimilarityPose(s, r, cx - s * (r * cy));
}

IcpResult run_icp(const KdTree3& tree, const PointCloud& source, const PointCloud& target,
                  const IcpConfig& cfg, const SimilarityPose& init, int max_iterations) {
  IcpResult res;
  res.pose = init;
  NearestSet nn = match(tree, target, source, init);
  res.objective.push_back(nn.objective);
  for (int it = 0; it < max_iterations; ++it) {
    if (nn.objective <= 1e-28) break;
    const auto fitted = similarity_fit(source, nn.matched);
    if (!fitted) break;
    if (fitted->scale() < cfg.min_scale || fitted->scale() > cfg.max_scale) {
      res.scale_out_of_range = true;
      break;
    }
    NearestSet next = match(tree, target, source, *fitted);
    if (next.objective > nn.objective) break;
    const double improvement = (nn.objective - next.objective) / nn.objective;
    res.pose = *fitted;
    res.iterations = it + 1;
    nn = std::move(next);
    res.objective.push_back(nn.objective);
    if (improvement < cfg.tolerance) break;
  }
  return res;
}

// Median distance from a point to its nearest other point.
double sample_spacing(const KdTree3& tree, const PointCloud& cloud) {
  std::vector<double> d(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    d[i] = tree.nearest(cloud.points[i], static_cast<int>(i)).distance2;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return std::sqrt(*mid);
}

// On sampled surfaces ICP can lock onto a copy of the target shifted by one
// sample, with every point matched to a neighbour of its true partner. Restart
// from translations of one and half a spacing along each axis while that helps.
void escape_sample_shifts(const KdTree3& tree, const PointCloud& source, const PointCloud& target,
                          const IcpConfig& cfg, int rounds, IcpResult& best) {
  const double h = sample_spacing(tree, target);
  if (!(h > 0.0)) return;
  for (int round = 0; round < rounds; ++round) {
    if (best.objective.back() <= 1e-28) return;
    bool improved = false;
    for (double f : {1.0, 0.5})
      for (int axis = 0; axis < 3; ++axis)
        for (double sign : {-1.0, 1.0}) {
          const SimilarityPose start(best.pose.scale(), best.pose.rotation(),
                                     best.pose.translation() + sign * f * h * Vector3d::Unit(axis));
          const IcpResult r = run_icp(tree, source, target, cfg, start, cfg.max_iterations);
          if (r.scale_out_of_range || !(r.objective.back() < best.objective.back())) continue;
          best.pose = r.pose;
          best.iterations += r.iterations;
          best.objective.push_back(r.objective.back());
          improved = true;
        }
    if (!improved) return;
  }
}

}  // namespace

SimilarityPose moment_matched_pose(const PointCloud& source, const PointCloud& target) {
  check_cloud(source, "source");
  check_cloud(target, "target");
  const Vector3d cs = centroid(source.points);
  const Vector3d ct = centroid(target.points);
  const double s = rms_radius(target.points, ct) / rms_radius(source.points, cs);
  return SimilarityPose(s, Matrix3d::Identity(), ct - s * cs);
}

IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpConfig& cfg,
                    const std::optional<SimilarityPose>& init) {
  check_cloud(source, "source");
  check_cloud(target, "target");
  const KdTree3 tree(target.points);
  return run_icp(tree, source, target, cfg, init ? *init : moment_matched_pose(source, target),
                 cfg.max_iterations);
}

IcpResult icp_align_multistart(const PointCloud& source, const PointCloud& target,
                               const MultiStartConfig& cfg) {
  check_cloud(source, "source");
  check_cloud(target, "target");
  const KdTree3 tree(target.points);

  const Vector3d cs = centroid(source.points);
  const Vector3d ct = centroid(target.points);
  std::vector<double> scales = {1.0};
  if (cfg.try_rms_scale) {
    const double ratio = rms_radius(target.points, ct) / rms_radius(source.points, cs);
    if (std::abs(ratio - 1.0) > 0.05 && ratio >= cfg.icp.min_scale && ratio <= cfg.icp.max_scale)
      scales.push_back(ratio);
  }

  std::vector<IcpResult> coarse;
  auto consider = [&](const SimilarityPose& start) {
    IcpResult r = run_icp(tree, source, target, cfg.icp, start, cfg.coarse_iterations);
    if (!r.scale_out_of_range) coarse.push_back(std::move(r));
  };

  consider(SimilarityPose::identity());
  for (double s : scales)
    for (double a : cfg.angles_deg)
      for (double b : cfg.angles_deg)
        for (double g : cfg.angles_deg) {
          const Matrix3d r = euler_xyz(deg2rad(a), deg2rad(b), deg2rad(g));
          consider(SimilarityPose(s, r, ct - s * (r * cs)));
        }
  if (cfg.try_rms_scale) {
    // Principal-axis alignment, one start per proper sign choice.
    const Matrix3d es = principal_axes(source.points, cs);
    const Matrix3d et = principal_axes(target.points, ct);
    for (int flip = 0; flip < 4; ++flip) {
      const Eigen::Vector3d d((flip & 1) ? -1.0 : 1.0, (flip & 2) ? -1.0 : 1.0, 1.0);
      Matrix3d r = et * d.asDiagonal() * es.transpose();
      if (r.determinant() < 0.0) r = et * (d.cwiseProduct(Eigen::Vector3d(1, 1, -1))).asDiagonal() * es.transpose();
      for (double s : scales) consider(SimilarityPose(s, r, ct - s * (r * cs)));
    }
  }
  if (coarse.empty()) throw RegistrationFailure("icp_align_multistart: every start left the scale range");

  // Stable sort keeps start order among equal objectives.
  std::stable_sort(coarse.begin(), coarse.end(), [](const IcpResult& x, const IcpResult& y) {
    return x.objective.back() < y.objective.back();
  });
  const std::size_t keep = std::min<std::size_t>(coarse.size(),
                                                 static_cast<std::size_t>(std::max(1, cfg.refine_candidates)));
  std::optional<IcpResult> best;
  for (std::size_t k = 0; k < keep; ++k) {
    IcpResult refined = run_icp(tree, source, target, cfg.icp, coarse[k].pose, cfg.icp.max_iterations);
    // Keep the full objective history from the coarse start.
    std::vector<double> history = coarse[k].objective;
    history.insert(history.end(), refined.objective.begin() + 1, refined.objective.end());
    refined.objective = std::move(history);
    refined.iterations += coarse[k].iterations;
    if (!best || refined.objective.back() < best->objective.back()) best = std::move(refined);
  }
  escape_sample_shifts(tree, source, target, cfg.icp, cfg.shift_rounds, *best);
  return *best;
}

CorrespondenceSet build_correspondences(const SimilarityPose& pose, const PointCloud& source,
                                        const PointCloud& target, double threshold,
                                        std::span<const int> target_pixels) {
  if (!target_pixels.empty() && target_pixels.size() != target.size())
    throw InvalidInput("build_correspondences: target pixel map size mismatch");
  if (target_pixels.empty() && target.has_source()) target_pixels = target.source;
  CorrespondenceSet out;
  out.threshold = threshold;
  if (source.size() == 0 || target.size() == 0) return out;
  const KdTree3 tree(target.points);
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto hit = tree.nearest(pose.apply(source.points[i]));
    const double d = std::sqrt(hit.distance2);
    if (!(d < threshold)) continue;
    Correspondence c;
    c.source = static_cast<int>(i);
    c.target = hit.index;
    c.source_pixel = source.has_source() ? source.source[i] : -1;
    c.target_pixel =
        target_pixels.empty() ? -1 : target_pixels[static_cast<std::size_t>(hit.index)];
    c.distance = d;
    out.pairs.push_back(c);
  }
  return out;
}

RstModel fit_rst_linear(std::span<const Vector3d> source, std::span<const Vector3d> target) {
  if (source.size() != target.size()) throw InvalidInput("fit_rst_linear: size mismatch");
  if (source.size() < 4) throw DegenerateSample("fit_rst_linear: fewer than 4 correspondences");
  const auto n = static_cast<Eigen::Index>(source.size());

  // Row 3i + r: x_r = a_r . y + t_r.
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(3 * n, 12);
  Eigen::VectorXd b(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector3d& y = source[static_cast<std::size_t>(i)];
    for (int r = 0; r < 3; ++r) {
      sys.block<1, 3>(3 * i + r, 3 * r) = y.transpose();
      sys(3 * i + r, 9 + r) = 1.0;
      b(3 * i + r) = target[static_cast<std::size_t>(i)](r);
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sys);
  qr.setThreshold(1e-10);
  if (qr.rank() < 12) throw DegenerateSample("fit_rst_linear: rank-deficient sample");
  const Eigen::VectorXd theta = qr.solve(b);

  RstModel m;
  for (int r = 0; r < 3; ++r) {
    m.a.row(r) = theta.segment<3>(3 * r).transpose();
    m.t(r) = theta(9 + r);
  }
  return m;
}

void validate(const RansacConfig& cfg) {
  if (cfg.min_sample < 4) throw InvalidInput("RansacConfig: min_sample must be >= 4");
  if (cfg.iterations < 1) throw InvalidInput("RansacConfig: iterations must be >= 1");
  if (!(cfg.inlier_threshold > 0.0)) throw InvalidInput("RansacConfig: inlier_threshold must be > 0");
}

RansacResult ransac_rst(std::span<const Vector3d> source, std::span<const Vector3d> target,
                        const RansacConfig& cfg) {
  validate(cfg);
  if (source.size() != target.size()) throw InvalidInput("ransac_rst: size mismatch");
  const std::size_t n = source.size();
  if (n < static_cast<std::size_t>(cfg.min_sample))
    throw RegistrationFailure("ransac_rst: fewer correspondences than the minimal sample");

  std::mt19937_64 rng(cfg.seed);
  std::vector<int> sample(static_cast<std::size_t>(cfg.min_sample));
  std::vector<Vector3d> ys(sample.size()), xs(sample.size());

  std::vector<int> best_inliers;
  double best_residual = std::numeric_limits<double>::infinity();
  std::vector<int> inliers;
  inliers.reserve(n);

  for (int it = 0; it < cfg.iterations; ++it) {
    // Distinct indices by partial rejection.
    for (std::size_t k = 0; k < sample.size(); ++k) {
      int v;
      do {
        v = static_cast<int>(uniform_below(rng, n));
      } while (std::find(sample.begin(), sample.begin() + static_cast<long>(k), v) !=
               sample.begin() + static_cast<long>(k));
      sample[k] = v;
      ys[k] = source[static_cast<std::size_t>(v)];
      xs[k] = target[static_cast<std::size_t>(v)];
    }
    RstModel model;
    try {
      model = fit_rst_linear(ys, xs);
    } catch (const DegenerateSample&) {
      continue;
    }
    inliers.clear();
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (model.apply(source[i]) - target[i]).norm();
      if (d < cfg.inlier_threshold) {
        inliers.push_back(static_cast<int>(i));
        residual += d;
      }
    }
    if (inliers.size() > best_inliers.size() ||
        (inliers.size() == best_inliers.size() && residual < best_residual)) {
      best_inliers = inliers;
      best_residual = residual;
    }
  }

  const std::size_t floor_count = std::max<std::size_t>(
      static_cast<std::size_t>(cfg.min_sample) + 1,
      static_cast<std::size_t>(std::ceil(cfg.min_inlier_ratio * static_cast<double>(n))));
  if (best_inliers.size() < floor_count)
    throw RegistrationFailure("ransac_rst: no consensus (best " +
                              std::to_string(best_inliers.size()) + " of " + std::to_string(n) +
                              " correspondences)");

  std::vector<Vector3d> yi, xi;
  yi.reserve(best_inliers.size());
  xi.reserve(best_inliers.size());
  for (int i : best_inliers) {
    yi.push_back(source[static_cast<std::size_t>(i)]);
    xi.push_back(target[static_cast<std::size_t>(i)]);
  }
  RansacResult out;
  try {
    out.model = fit_rst_linear(yi, xi);
  } catch (const DegenerateSample& e) {
    throw RegistrationFailure(std::string("ransac_rst: inlier refit failed: ") + e.what());
  }
  EulerDecomposition dec;
  try {
    dec = decompose_rotation(out.model.a, cfg.isotropy_tolerance);
  } catch (const Error& e) {
    throw RegistrationFailure(std::string("ransac_rst: ") + e.what());
  }
  Vector3d t = Vector3d::Zero();
  for (std::size_t k = 0; k < yi.size(); ++k) t += xi[k] - dec.scale * (dec.rotation * yi[k]);
  t /= static_cast<double>(yi.size());
  out.pose = SimilarityPose::from_euler_deg(dec.scale, dec.euler_deg(0), dec.euler_deg(1),
                                            dec.euler_deg(2), t);
  out.inliers = std::move(best_inliers);
  out.inlier_residual = best_residual;
  return out;
}

namespace {

Matrix3d d_rot_x(double a) {
  Matrix3d d;
  d << 0, 0, 0, 0, -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a);
  return d;
}
Matrix3d d_rot_y(double b) {
  Matrix3d d;
  d << -std::sin(b), 0, std::cos(b), 0, 0, 0, -std::cos(b), 0, -std::sin(b);
  return d;
}
Matrix3d d_rot_z(double g) {
  Matrix3d d;
  d << -std::sin(g), -std::cos(g), 0, std::cos(g), -std::sin(g), 0, 0, 0, 0;
  return d;
}

struct EulerFit {
  Matrix3d target;
  void operator()(const Vector3d& ang, Eigen::Matrix<double, 9, 1>& r,
                  Eigen::Matrix<double, 9, 3>* j) const {
    const Matrix3d rx = rot_x(ang(0)), ry = rot_y(ang(1)), rz = rot_z(ang(2));
    const Matrix3d diff = rx * ry * rz - target;
    r = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(diff.data());
    if (j == nullptr) return;
    const Matrix3d da = d_rot_x(ang(0)) * ry * rz;
    const Matrix3d db = rx * d_rot_y(ang(1)) * rz;
    const Matrix3d dg = rx * ry * d_rot_z(ang(2));
    j->col(0) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(da.data());
    j->col(1) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(db.data());
    j->col(2) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(dg.data());
  }
};

}  // namespace

EulerDecomposition decompose_rotation(const Matrix3d& a, double isotropy_tolerance) {
  if (!a.allFinite()) throw InvalidInput("decompose_rotation: non-finite matrix");
  const double det = a.determinant();
  if (!(det > 0.0)) throw ReflectionError("decompose_rotation: det(A) <= 0");
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Matrix3d>(a).singularValues();
  if (sv(0) / sv(2) - 1.0 > isotropy_tolerance)
    throw NotASimilarity("decompose_rotation: singular values are not isotropic");

  EulerDecomposition out;
  out.scale = std::cbrt(det);
  const EulerFit fit{a / out.scale};
  Vector3d ang = euler_xyz_angles(fit.target);
  LmOptions opts;
  opts.max_iterations = 200;
  levenberg_marquardt<3, 9>(fit, ang, opts);
  out.euler_deg = ang.unaryExpr([](double v) { return rad2deg(v); });
  out.rotation = euler_xyz(ang(0), ang(1), ang(2));
  out.residual = (out.rotation - fit.target).norm();
  return out;
}

double rotation_error(const Matrix3d& r_est, const Matrix3d& r_gt) {
  const double ne = r_est.norm();
  const double ng = r_gt.norm();
  if (!(ne > 0.0) || !(ng > 0.0)) throw InvalidInput("rotation_error: zero matrix");
  return (r_est / ne - r_gt / ng).norm();
}

RegistrationResult register_clouds(const PointCloud& source, const PointCloud& target,
                                   const RegistrationConfig& cfg,
                                   const std::optional<SimilarityPose>& init,
                                   std::span<const int> target_pixels) {
  IcpResult icp;
  try {
    icp = init ? icp_align(source, target, cfg.initial.icp, *init)
               : icp_align_multistart(source, target, cfg.initial);
  } catch (const DegenerateSample& e) {
    throw RegistrationFailure(e.what());
  }

  const CorrespondenceSet initial =
      build_correspondences(icp.pose, source, target, cfg.correspondence_threshold, target_pixels);
  std::vector<Vector3d> ys, xs;
  ys.reserve(initial.size());
  xs.reserve(initial.size());
  for (const auto& c : initial.pairs) {
    ys.push_back(source.points[static_cast<std::size_t>(c.source)]);
    xs.push_back(target.points[static_cast<std::size_t>(c.target)]);
  }
  const RansacResult ransac = ransac_rst(ys, xs, cfg.ransac);

  RegistrationResult out;
  out.pose = ransac.pose;
  out.inliers = ransac.inliers.size();
  out.icp_objective = icp.objective.back();
  out.correspondences =
      build_correspondences(out.pose, source, target, cfg.correspondence_threshold, target_pixels);
  return out;
}

}  // namespace bimodal
