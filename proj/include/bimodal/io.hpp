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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bimodal/pipeline.hpp"
#include "bimodal/sh_lighting.hpp"
#include "bimodal/synthgen.hpp"
#include "bimodal/types.hpp"

namespace bimodal::io {

namespace fs = std::filesystem;

/// Raw PFM contents: rows top to bottom, `channels` floats per pixel.
struct PfmImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;
};

/// Reads both byte orders ("Pf" = 1 channel, "PF" = 3 channels).
PfmImage read_pfm(const fs::path& path);
/// Always little-endian (negative scale), rows stored bottom to top.
void write_pfm(const fs::path& path, const PfmImage& image);

/// PFM or CSV (one row per line, comma separated; NaN marks a hole). Pitch
/// comes from the sidecar `<path>.json` ({"pitch_x", "pitch_y"}) when present.
DepthGrid load_depth(const fs::path& path);
/// PFM with NaN holes plus the pitch sidecar.
void save_depth(const fs::path& path, const DepthGrid& depth);

/// 3-channel PFM is taken as log-shading already (NaN = hole). PPM (P6/P3)
/// and PNG are linear intensities: value / maxval, clamped to 1e-6, then
/// logged; a zero alpha marks a hole.
LogShadingImage load_shading(const fs::path& path);
void save_shading(const fs::path& path, const LogShadingImage& shading);

NormalField load_normals(const fs::path& path);
void save_normals(const fs::path& path, const NormalField& normals);
/// (n + 1) / 2 per channel, 8-bit RGBA; holes are transparent black.
void save_normals_png(const fs::path& path, const NormalField& normals);

/// JSON ({"coefficients": [...]} or a bare array) or plain text, 27 numbers.
ShLighting load_lighting(const fs::path& path);
void save_lighting(const fs::path& path, const ShLighting& lighting);

SimilarityPose load_pose(const fs::path& path);
void save_pose(const fs::path& path, const SimilarityPose& pose);

void save_ply(const fs::path& path, const PointCloud& cloud);

void save_trace(const fs::path& path, const std::vector<IterationRecord>& trace,
                bool converged, bool diverged, const std::string& failure = {});

void save_sweep_csv(const fs::path& path, const SweepTable& table);
void save_sweep_json(const fs::path& path, const SweepTable& table);

std::string sha256_hex(const fs::path& path);
/// manifest.json in `dir`: every other regular file under it, sorted by
/// relative path, with its SHA-256.
void write_manifest(const fs::path& dir);

/// Settings read from a JSON config; absent keys keep their defaults.
struct RunConfig {
  PipelineConfig pipeline;
  std::uint64_t seed = 0;
  double prior_percentage = -1.0;  // < 0: prior on every corresponded pixel
};

RunConfig load_run_config(const fs::path& path);

}  // namespace bimodal::io
