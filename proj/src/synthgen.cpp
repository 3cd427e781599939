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

#include "bimodal/synthgen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "bimodal/errors.hpp"
#include "bimodal/geometry.hpp"
#include "bimodal/random.hpp"
#include "bimodal/registration.hpp"

namespace bimodal {

DepthGrid face_surface(int width, int height) {
  if (width < 2 || height < 2) throw InvalidInput("face_surface: grid must be at least 2x2");
  DepthGrid d(width, height);
  const double cx = 0.5 * (width - 1), cy = 0.5 * (height - 1);
  const double relief = 0.3 * width;
  auto bump = [](double u, double v, double u0, double v0, double su, double sv) {
    const double a = (u - u0) / su, b = (v - v0) / sv;
    return std::exp(-0.5 * (a * a + b * b));
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x - cx) / (0.5 * width);
      const double v = (y - cy) / (0.5 * height);
      double h = 0.75 * bump(u, v, 0.0, 0.05, 0.55, 0.7);   // head
      h += 0.30 * bump(u, v, 0.0, 0.05, 0.12, 0.25);        // nose
      h += 0.12 * bump(u, v, 0.0, -0.42, 0.45, 0.12);       // brow
      h -= 0.10 * bump(u, v, -0.3, -0.22, 0.13, 0.1);       // eye sockets
      h -= 0.10 * bump(u, v, 0.3, -0.22, 0.13, 0.1);
      h += 0.10 * bump(u, v, 0.0, 0.62, 0.2, 0.1);          // chin
      h += 0.06 * bump(u, v, 0.35, 0.25, 0.15, 0.15);       // cheek
      d.z(x, y) = relief * h;
    }
  }
  return d;
}

ShLighting default_lighting() {
  ShVector c;
  c << 1.0, 0.1, 0.5, 0.9, 0.05, 0.05, -0.1, 0.05, 0.1,   //
      1.0, 0.9, 0.5, -0.3, -0.05, 0.1, -0.1, 0.0, -0.05,  //
      1.0, -0.4, 0.9, -0.4, 0.0, -0.05, 0.05, 0.1, 0.0;
  return ShLighting(c);
}

void validate(const SynthSpec& spec) {
  if (!(spec.overlap > 0.0 && spec.overlap <= 1.0))
    throw InvalidInput("SynthSpec: overlap must lie in (0, 1]");
  if (!(spec.prior_percentage >= 0.0 && spec.prior_percentage <= 1.0))
    throw InvalidInput("SynthSpec: prior percentage must lie in [0, 1]");
  if (!std::isfinite(spec.alpha_deg) || !std::isfinite(spec.beta_deg) ||
      !std::isfinite(spec.gamma_deg))
    throw InvalidInput("SynthSpec: angles must be finite");
  if (spec.stride < 1) throw InvalidInput("SynthSpec: stride must be >= 1");
  if (!(spec.depth_noise >= 0.0)) throw InvalidInput("SynthSpec: depth noise must be >= 0");
  validate(spec.source);
}

DepthGrid rasterize_surface(const DepthGrid& source, const SimilarityPose& pose,
                            Vector3d* origin) {
  const auto& z = source.z;
  const double px = source.pitch_x, py = source.pitch_y;
  std::vector<Vector3d> verts(z.size());
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  for (int y = 0; y < z.height(); ++y) {
    for (int x = 0; x < z.width(); ++x) {
      if (!z.valid(x, y)) continue;
      const Vector3d v = pose.apply(Vector3d(x * px, y * py, z(x, y)));
      verts[z.index(x, y)] = v;
      min_x = std::min(min_x, v.x() / px);
      max_x = std::max(max_x, v.x() / px);
      min_y = std::min(min_y, v.y() / py);
      max_y = std::max(max_y, v.y() / py);
    }
  }
  if (!std::isfinite(min_x)) throw InvalidInput("rasterize_surface: empty source");
  const double ox = std::floor(min_x + 1e-9), oy = std::floor(min_y + 1e-9);
  const int w = static_cast<int>(std::floor(max_x - ox + 1e-9)) + 1;
  const int h = static_cast<int>(std::floor(max_y - oy + 1e-9)) + 1;
  DepthGrid out(w, h, 0.0, false);
  out.pitch_x = px;
  out.pitch_y = py;
  if (origin) *origin = Vector3d(ox * px, oy * py, 0.0);

  // Lattice coordinates in cell units.
  auto cell = [&](const Vector3d& v) {
    return Vector3d(v.x() / px - ox, v.y() / py - oy, v.z());
  };
  auto raster = [&](const Vector3d& a, const Vector3d& b, const Vector3d& c) {
    const double area = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    if (std::abs(area) < 1e-12) return;
    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({a.x(), b.x(), c.x()}) - 1e-9)));
    const int x1 = std::min(w - 1, static_cast<int>(std::floor(std::max({a.x(), b.x(), c.x()}) + 1e-9)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({a.y(), b.y(), c.y()}) - 1e-9)));
    const int y1 = std::min(h - 1, static_cast<int>(std::floor(std::max({a.y(), b.y(), c.y()}) + 1e-9)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double wa = ((b.x() - x) * (c.y() - y) - (b.y() - y) * (c.x() - x)) / area;
        const double wb = ((c.x() - x) * (a.y() - y) - (c.y() - y) * (a.x() - x)) / area;
        const double wc = 1.0 - wa - wb;
        if (wa < -1e-9 || wb < -1e-9 || wc < -1e-9) continue;
        const double depth = wa * a.z() + wb * b.z() + wc * c.z();
        const std::size_t i = out.z.index(x, y);
        if (!out.z.valid(i) || depth > out.z[i]) {
          out.z[i] = depth;
          out.z.set_valid(i, true);
        }
      }
    }
  };
  for (int y = 0; y + 1 < z.height(); ++y) {
    for (int x = 0; x + 1 < z.width(); ++x) {
      if (!z.valid(x, y) || !z.valid(x + 1, y) || !z.valid(x, y + 1) || !z.valid(x + 1, y + 1))
        continue;
      const Vector3d v00 = cell(verts[z.index(x, y)]);
      const Vector3d v10 = cell(verts[z.index(x + 1, y)]);
      const Vector3d v01 = cell(verts[z.index(x, y + 1)]);
      const Vector3d v11 = cell(verts[z.index(x + 1, y + 1)]);
      raster(v00, v10, v11);
      raster(v00, v11, v01);
    }
  }
  return out;
}

Mask select_prior_pixels(std::span<const std::uint8_t> mask, double prior_percentage,
                         std::uint64_t seed) {
  if (!(prior_percentage >= 0.0 && prior_percentage <= 1.0))
    throw InvalidInput("select_prior_pixels: percentage must lie in [0, 1]");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(i);
  std::mt19937_64 rng(seed);
  fisher_yates(std::span<std::size_t>(idx), rng);
  const auto take =
      static_cast<std::size_t>(std::llround(prior_percentage * static_cast<double>(idx.size())));
  Mask out(mask.size(), 0);
  for (std::size_t k = 0; k < take; ++k) out[idx[k]] = 1;
  return out;
}

std::uint64_t cell_seed(std::uint64_t seed, double beta_deg, double overlap) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ std::bit_cast<std::uint64_t>(beta_deg));
  return splitmix64(h ^ std::bit_cast<std::uint64_t>(overlap));
}

namespace {

struct Strip {
  int begin = 0;
  int end = 0;
};

Strip choose_strip(const DepthGrid& raster, double overlap, std::size_t footprint) {
  const int w = raster.width();
  std::vector<std::size_t> cols(static_cast<std::size_t>(w), 0);
  double weighted = 0.0;
  for (int y = 0; y < raster.height(); ++y)
    for (int x = 0; x < w; ++x)
      if (raster.z.valid(x, y)) {
        ++cols[static_cast<std::size_t>(x)];
        weighted += x;
      }
  const double center = weighted / static_cast<double>(footprint);
  const double target = overlap * static_cast<double>(footprint);
  std::vector<std::size_t> prefix(static_cast<std::size_t>(w) + 1, 0);
  std::partial_sum(cols.begin(), cols.end(), prefix.begin() + 1);

  Strip best{0, w};
  double best_gap = std::numeric_limits<double>::infinity();
  double best_offset = std::numeric_limits<double>::infinity();
  for (int a = 0; a < w; ++a) {
    for (int b = a + 1; b <= w; ++b) {
      const auto count = static_cast<double>(prefix[static_cast<std::size_t>(b)] -
                                             prefix[static_cast<std::size_t>(a)]);
      if (count == 0.0) continue;
      const double gap = std::abs(count - target);
      const double offset = std::abs(0.5 * (a + b - 1) - center);
      if (gap < best_gap - 1e-9 || (gap < best_gap + 1e-9 && offset < best_offset - 1e-9)) {
        best = {a, b};
        best_gap = gap;
        best_offset = offset;
      }
    }
  }
  return best;
}

void add_noise(DepthGrid& depth, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  std::mt19937_64 rng(splitmix64(seed ^ 0x6e6f697365ULL));
  for (std::size_t i = 0; i < depth.z.size(); ++i) {
    if (!depth.z.valid(i)) continue;
    // Box-Muller on our own uniforms keeps the stream library-independent.
    const double u1 = 1.0 - uniform_unit(rng);
    const double u2 = uniform_unit(rng);
    depth.z[i] += sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
}

}  // namespace

SynthPair synthesize_pair(const SynthSpec& spec) {
  validate(spec);
  SynthPair out;
  out.normals = depth_to_normals(spec.source);
  out.shading = render_log_shading(spec.lighting, out.normals);
  out.prior_mask = select_prior_pixels(out.shading.mask(), spec.prior_percentage, spec.seed);

  const Matrix3d r =
      euler_xyz(deg2rad(spec.alpha_deg), deg2rad(spec.beta_deg), deg2rad(spec.gamma_deg));
  const SimilarityPose to_view(1.0, r.transpose(), Vector3d::Zero());
  Vector3d origin;
  const DepthGrid raster = rasterize_surface(spec.source, to_view, &origin);
  out.footprint = raster.z.count_valid();
  if (out.footprint == 0) throw InvalidInput("synthesize_pair: empty rotated view");

  const Strip strip = spec.overlap >= 1.0 ? Strip{0, raster.width()}
                                          : choose_strip(raster, spec.overlap, out.footprint);
  int y0 = raster.height(), y1 = -1;
  for (int y = 0; y < raster.height(); ++y)
    for (int x = strip.begin; x < strip.end; ++x)
      if (raster.z.valid(x, y)) {
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (y1 < 0) throw InvalidInput("synthesize_pair: empty overlap after clipping");

  const int s = spec.stride;
  const int w = (strip.end - strip.begin - 1) / s + 1;
  const int h = (y1 - y0) / s + 1;
  DepthGrid depth(w, h, 0.0, false);
  depth.pitch_x = raster.pitch_x * s;
  depth.pitch_y = raster.pitch_y * s;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int x = strip.begin + u * s, y = y0 + v * s;
      if (!raster.z.valid(x, y)) continue;
      depth.z(u, v) = raster.z(x, y);
      depth.z.set_valid(depth.z.index(u, v), true);
    }
  }
  if (depth.z.count_valid() == 0) throw InvalidInput("synthesize_pair: empty overlap after clipping");
  add_noise(depth, spec.depth_noise, spec.seed);
  out.depth = std::move(depth);

  const Vector3d offset =
      origin + Vector3d(strip.begin * raster.pitch_x, y0 * raster.pitch_y, 0.0);
  out.pose = SimilarityPose(1.0, r, r * offset);
  return out;
}

SweepTable run_sweep(const DepthGrid& source, const ShLighting& lighting,
                     const std::vector<double>& betas, const std::vector<double>& overlaps,
                     const SweepConfig& cfg) {
  if (betas.empty() || overlaps.empty()) throw InvalidInput("run_sweep: empty sweep list");
  SweepTable table;
  table.betas = betas;
  table.overlaps = overlaps;
  for (double beta : betas) {
    for (double pw : overlaps) {
      SweepCell cell;
      cell.beta_deg = beta;
      cell.overlap = pw;
      const std::uint64_t seed = cell_seed(cfg.seed, beta, pw);
      try {
        SynthSpec spec;
        spec.source = source;
        spec.lighting = lighting;
        spec.beta_deg = beta;
        spec.overlap = pw;
        spec.stride = cfg.stride;
        spec.depth_noise = cfg.depth_noise;
        spec.seed = seed;
        const SynthPair pair = synthesize_pair(spec);
        PipelineConfig pc = cfg.pipeline;
        pc.registration.ransac.seed = seed;
        const PipelineResult res = run_bimodal_stereo(pair.shading, pair.depth, lighting, pc);
        cell.error = rotation_error(res.pose.rotation(), pair.pose.rotation());
        cell.iterations = static_cast<int>(res.trace.size());
        cell.euler_deg = res.pose.euler_deg();
        cell.scale = res.pose.scale();
      } catch (const PipelineFailure& e) {
        cell.failed = true;
        cell.iterations = static_cast<int>(e.trace().size());
        cell.message = e.what();
      } catch (const Error& e) {
        cell.failed = true;
        cell.message = e.what();
      }
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

}  // namespace bimodal
