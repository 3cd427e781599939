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

#include "bimodal/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>
#include <png.h>

#include "bimodal/errors.hpp"
#include "bimodal/geometry.hpp"

namespace bimodal::io {

using nlohmann::json;

namespace {

constexpr float kHole = std::numeric_limits<float>::quiet_NaN();

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

// Whitespace-separated header tokens of netpbm-style files; '#' starts a comment.
class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  std::string token() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) throw FormatError("truncated header");
    return bytes_.substr(start, pos_ - start);
  }

  int integer() {
    const std::string t = token();
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (*end != '\0' || v < 0 || v > (1L << 30)) throw FormatError("bad header integer: " + t);
    return static_cast<int>(v);
  }

  double real() {
    const std::string t = token();
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (*end != '\0' || !std::isfinite(v)) throw FormatError("bad header number: " + t);
    return v;
  }

  // Exactly one whitespace byte separates the header from binary data.
  std::size_t data_start() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
      throw FormatError("missing separator after header");
    return pos_ + 1;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// PFM

PfmImage read_pfm(const fs::path& path) {
  const std::string bytes = read_file(path);
  HeaderReader hdr(bytes);
  PfmImage img;
  const std::string magic = hdr.token();
  if (magic == "PF") {
    img.channels = 3;
  } else if (magic == "Pf") {
    img.channels = 1;
  } else {
    throw FormatError(path.string() + ": not a PFM file");
  }
  img.width = hdr.integer();
  img.height = hdr.integer();
  const double scale = hdr.real();
  if (scale == 0.0) throw FormatError(path.string() + ": zero PFM scale");
  const bool little = scale < 0.0;
  const std::size_t start = hdr.data_start();
  const std::size_t count =
      static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) * img.channels;
  if (bytes.size() - start != count * 4)
    throw FormatError(path.string() + ": PFM payload does not match its dimensions");

  img.data.resize(count);
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) {
    // File rows run bottom to top.
    const std::size_t src = start + static_cast<std::size_t>(img.height - 1 - y) * row * 4;
    for (std::size_t k = 0; k < row; ++k) {
      std::array<unsigned char, 4> b;
      std::memcpy(b.data(), bytes.data() + src + 4 * k, 4);
      if (little != (std::endian::native == std::endian::little)) std::reverse(b.begin(), b.end());
      std::memcpy(&img.data[static_cast<std::size_t>(y) * row + k], b.data(), 4);
    }
  }
  return img;
}

void write_pfm(const fs::path& path, const PfmImage& img) {
  if (img.channels != 1 && img.channels != 3) throw InvalidInput("write_pfm: 1 or 3 channels");
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  if (img.data.size() != row * static_cast<std::size_t>(img.height))
    throw InvalidInput("write_pfm: data size mismatch");
  std::string out = fmt::format("{}\n{} {}\n-1.0\n", img.channels == 3 ? "PF" : "Pf", img.width,
                                img.height);
  const std::size_t header = out.size();
  out.resize(header + row * static_cast<std::size_t>(img.height) * 4);
  for (int y = 0; y < img.height; ++y) {
    const std::size_t dst = header + static_cast<std::size_t>(img.height - 1 - y) * row * 4;
    for (std::size_t k = 0; k < row; ++k) {
      std::array<unsigned char, 4> b;
      std::memcpy(b.data(), &img.data[static_cast<std::size_t>(y) * row + k], 4);
      if (std::endian::native != std::endian::little) std::reverse(b.begin(), b.end());
      std::memcpy(out.data() + dst + 4 * k, b.data(), 4);
    }
  }
  write_file(path, out);
}

namespace {

template <typename G>
PfmImage to_pfm3(const G& grid) {
  PfmImage img{grid.width(), grid.height(), 3, {}};
  img.data.reserve(grid.size() * 3);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (int c = 0; c < 3; ++c)
      img.data.push_back(grid.valid(i) ? static_cast<float>(grid[i](c)) : kHole);
  return img;
}

template <typename G>
G from_pfm3(const PfmImage& img, const fs::path& path) {
  if (img.channels != 3) throw FormatError(path.string() + ": expected a 3-channel PFM");
  G grid(img.width, img.height, Vector3d::Zero(), false);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vector3d v(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]);
    if (!v.allFinite()) continue;
    grid[i] = v;
    grid.set_valid(i, true);
  }
  return grid;
}

fs::path sidecar(const fs::path& path) { return fs::path(path.string() + ".json"); }

DepthGrid parse_csv_depth(const std::string& text, const fs::path& path) {
  std::vector<double> values;
  int width = -1, height = 0;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    int cols = 0;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      const std::string t = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
      char* end = nullptr;
      const double v = std::strtod(t.c_str(), &end);
      if (t.empty() || *end != '\0')
        throw FormatError(path.string() + ": bad CSV cell '" + t + "'");
      values.push_back(v);
      ++cols;
    }
    if (width < 0) width = cols;
    if (cols != width) throw FormatError(path.string() + ": ragged CSV rows");
    ++height;
  }
  if (width <= 0) throw FormatError(path.string() + ": empty CSV");
  DepthGrid d(width, height, 0.0, false);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    d.z[i] = values[i];
    d.z.set_valid(i, true);
  }
  return d;
}

}  // namespace

DepthGrid load_depth(const fs::path& path) {
  DepthGrid d;
  if (lower_extension(path) == ".csv") {
    d = parse_csv_depth(read_file(path), path);
  } else {
    const PfmImage img = read_pfm(path);
    if (img.channels != 1) throw FormatError(path.string() + ": depth PFM must have 1 channel");
    d = DepthGrid(img.width, img.height, 0.0, false);
    for (std::size_t i = 0; i < d.z.size(); ++i) {
      if (!std::isfinite(img.data[i])) continue;
      d.z[i] = img.data[i];
      d.z.set_valid(i, true);
    }
  }
  if (fs::exists(sidecar(path))) {
    try {
      const json j = json::parse(read_file(sidecar(path)));
      d.pitch_x = j.value("pitch_x", 1.0);
      d.pitch_y = j.value("pitch_y", 1.0);
    } catch (const json::exception& e) {
      throw FormatError(sidecar(path).string() + ": " + e.what());
    }
  }
  validate(d);
  return d;
}

void save_depth(const fs::path& path, const DepthGrid& depth) {
  PfmImage img{depth.width(), depth.height(), 1, {}};
  img.data.reserve(depth.z.size());
  for (std::size_t i = 0; i < depth.z.size(); ++i)
    img.data.push_back(depth.z.valid(i) ? static_cast<float>(depth.z[i]) : kHole);
  write_pfm(path, img);
  write_file(sidecar(path),
             json{{"pitch_x", depth.pitch_x}, {"pitch_y", depth.pitch_y}}.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Shading images

namespace {

struct LinearImage {
  int width = 0;
  int height = 0;
  std::vector<Vector3d> rgb;  // normalized to [0, 1]
  std::vector<std::uint8_t> valid;
};

LinearImage read_ppm(const fs::path& path) {
  const std::string bytes = read_file(path);
  HeaderReader hdr(bytes);
  const std::string magic = hdr.token();
  if (magic != "P6" && magic != "P3") throw FormatError(path.string() + ": not a P3/P6 PPM");
  LinearImage img;
  img.width = hdr.integer();
  img.height = hdr.integer();
  const int maxval = hdr.integer();
  if (maxval < 1 || maxval > 65535) throw FormatError(path.string() + ": unsupported maxval");
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.rgb.resize(n);
  img.valid.assign(n, 1);
  if (magic == "P3") {
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) {
        const int v = hdr.integer();
        if (v > maxval) throw FormatError(path.string() + ": sample above maxval");
        img.rgb[i](c) = static_cast<double>(v) / maxval;
      }
    return img;
  }
  const std::size_t start = hdr.data_start();
  const int bps = maxval < 256 ? 1 : 2;
  if (bytes.size() - start < n * 3 * static_cast<std::size_t>(bps))
    throw FormatError(path.string() + ": truncated PPM payload");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + start);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      const std::size_t k = (3 * i + static_cast<std::size_t>(c)) * static_cast<std::size_t>(bps);
      const int v = bps == 1 ? p[k] : (p[k] << 8) | p[k + 1];
      img.rgb[i](c) = static_cast<double>(v) / maxval;
    }
  return img;
}

LinearImage read_png(const fs::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.string().c_str(), "rb"), &std::fclose);
  if (!file) throw FormatError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw FormatError("libpng initialisation failed");
  LinearImage img;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + ": malformed PNG");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (!(png_get_color_type(png, info) & PNG_COLOR_MASK_ALPHA) && color != PNG_COLOR_TYPE_PALETTE &&
      !png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_add_alpha(png, 0xffff, PNG_FILLER_AFTER);
  if (color == PNG_COLOR_TYPE_PALETTE && !png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_add_alpha(png, 0xffff, PNG_FILLER_AFTER);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  const int depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  if ((depth != 8 && depth != 16) || channels != 4) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + ": unsupported PNG layout");
  }
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * static_cast<std::size_t>(img.height));
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + stride * y;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.rgb.resize(n);
  img.valid.assign(n, 1);
  const double maxval = depth == 8 ? 255.0 : 65535.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto sample = [&](int c) -> double {
      if (depth == 8) return buffer[4 * i + static_cast<std::size_t>(c)];
      const std::size_t k = 8 * i + 2 * static_cast<std::size_t>(c);
      return (buffer[k] << 8) | buffer[k + 1];
    };
    img.rgb[i] = Vector3d(sample(0), sample(1), sample(2)) / maxval;
    img.valid[i] = sample(3) > 0.0 ? 1 : 0;
  }
  return img;
}

}  // namespace

LogShadingImage load_shading(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".pfm") return from_pfm3<LogShadingImage>(read_pfm(path), path);
  LinearImage lin;
  if (ext == ".ppm") {
    lin = read_ppm(path);
  } else if (ext == ".png") {
    lin = read_png(path);
  } else {
    throw FormatError(path.string() + ": unsupported shading format");
  }
  LogShadingImage out(lin.width, lin.height, Vector3d::Zero(), false);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!lin.valid[i]) continue;
    out[i] = lin.rgb[i].cwiseMax(1e-6).array().log().matrix();
    out.set_valid(i, true);
  }
  return out;
}

void save_shading(const fs::path& path, const LogShadingImage& shading) {
  write_pfm(path, to_pfm3(shading));
}

NormalField load_normals(const fs::path& path) {
  NormalField n = from_pfm3<NormalField>(read_pfm(path), path);
  // Stored as float; restore unit length.
  for (std::size_t i = 0; i < n.size(); ++i)
    if (n.valid(i)) n[i].normalize();
  return n;
}

void save_normals(const fs::path& path, const NormalField& normals) {
  write_pfm(path, to_pfm3(normals));
}

void save_normals_png(const fs::path& path, const NormalField& normals) {
  std::vector<unsigned char> px(normals.size() * 4, 0);
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (!normals.valid(i)) continue;
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp((normals[i](c) + 1.0) * 0.5, 0.0, 1.0);
      px[4 * i + static_cast<std::size_t>(c)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    px[4 * i + 3] = 255;
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(normals.width());
  image.height = static_cast<png_uint_32>(normals.height());
  image.format = PNG_FORMAT_RGBA;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, px.data(), 0, nullptr))
    throw FormatError("cannot write " + path.string() + ": " + image.message);
}

// ---------------------------------------------------------------------------
// Lighting, poses, clouds

ShLighting load_lighting(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<double> values;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) {
    try {
      const json j = json::parse(text);
      values = (j.is_object() ? j.at("coefficients") : j).get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  } else {
    std::string cleaned = text;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::istringstream in(cleaned);
    std::string tok;
    while (in >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (*end != '\0') throw FormatError(path.string() + ": bad lighting value '" + tok + "'");
      values.push_back(v);
    }
  }
  if (values.size() != 27)
    throw FormatError(path.string() + ": expected 27 lighting coefficients, got " +
                      std::to_string(values.size()));
  ShVector c;
  for (int k = 0; k < 27; ++k) c(k) = values[static_cast<std::size_t>(k)];
  if (!c.allFinite()) throw FormatError(path.string() + ": non-finite lighting coefficient");
  return ShLighting(c);
}

void save_lighting(const fs::path& path, const ShLighting& lighting) {
  std::vector<double> v(lighting.coefficients().data(), lighting.coefficients().data() + 27);
  write_file(path, json{{"coefficients", v}}.dump(2) + "\n");
}

SimilarityPose load_pose(const fs::path& path) {
  try {
    const json j = json::parse(read_file(path));
    const auto r = j.at("R").get<std::vector<double>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) throw FormatError(path.string() + ": bad R or t size");
    Matrix3d rot;
    for (int k = 0; k < 9; ++k) rot(k / 3, k % 3) = r[static_cast<std::size_t>(k)];
    return SimilarityPose(j.at("s").get<double>(), rot, Vector3d(t[0], t[1], t[2]));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_pose(const fs::path& path, const SimilarityPose& pose) {
  std::vector<double> r;
  for (int k = 0; k < 9; ++k) r.push_back(pose.rotation()(k / 3, k % 3));
  const Vector3d& t = pose.translation();
  json j;
  j["s"] = pose.scale();
  j["R"] = r;
  j["t"] = {t.x(), t.y(), t.z()};
  j["alpha_deg"] = pose.euler_deg()(0);
  j["beta_deg"] = pose.euler_deg()(1);
  j["gamma_deg"] = pose.euler_deg()(2);
  write_file(path, j.dump(2) + "\n");
}

void save_ply(const fs::path& path, const PointCloud& cloud) {
  std::string out = fmt::format(
      "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\n"
      "property double z\nend_header\n",
      cloud.size());
  for (const auto& p : cloud.points) out += fmt::format("{} {} {}\n", p.x(), p.y(), p.z());
  write_file(path, out);
}

void save_trace(const fs::path& path, const std::vector<IterationRecord>& trace,
                bool converged, bool diverged, const std::string& failure) {
  json items = json::array();
  for (const auto& r : trace)
    items.push_back({{"k", r.k},
                     {"rot_delta", r.rot_delta},
                     {"beta_deg", r.beta_deg},
                     {"inliers", r.inliers},
                     {"sfs_mean_residual", r.sfs_mean_residual}});
  json j{{"iterations", items}, {"converged", converged}, {"diverged", diverged}};
  if (!failure.empty()) j["failure"] = failure;
  write_file(path, j.dump(2) + "\n");
}

void save_sweep_csv(const fs::path& path, const SweepTable& table) {
  std::string out = "beta_deg";
  for (double pw : table.overlaps) out += fmt::format(",{}", pw);
  out += "\n";
  for (std::size_t r = 0; r < table.betas.size(); ++r) {
    out += fmt::format("{}", table.betas[r]);
    for (std::size_t c = 0; c < table.overlaps.size(); ++c) {
      const SweepCell& cell = table.at(r, c);
      out += cell.failed ? std::string(",FAIL") : fmt::format(",{:.6f}", cell.error);
    }
    out += "\n";
  }
  write_file(path, out);
}

void save_sweep_json(const fs::path& path, const SweepTable& table) {
  json cells = json::array();
  for (const auto& c : table.cells) {
    json j{{"beta_deg", c.beta_deg},
           {"overlap", c.overlap},
           {"failed", c.failed},
           {"iterations", c.iterations}};
    if (c.failed) {
      j["message"] = c.message;
    } else {
      j["rotation_error"] = c.error;
      j["scale"] = c.scale;
      j["euler_deg"] = {c.euler_deg(0), c.euler_deg(1), c.euler_deg(2)};
    }
    cells.push_back(j);
  }
  write_file(path, json{{"betas", table.betas}, {"overlaps", table.overlaps}, {"cells", cells}}
                           .dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Manifest

std::string sha256_hex(const fs::path& path) {
  const std::string bytes = read_file(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr))
    throw FormatError("SHA-256 failed for " + path.string());
  std::string hex;
  for (unsigned int k = 0; k < len; ++k) hex += fmt::format("{:02x}", digest[k]);
  return hex;
}

void write_manifest(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  json list = json::array();
  for (const auto& f : files) list.push_back({{"path", f}, {"sha256", sha256_hex(dir / f)}});
  write_file(dir / "manifest.json", json{{"files", list}}.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Config

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw FormatError(where + ": unknown key '" + key + "'");
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig load_run_config(const fs::path& path) {
  RunConfig cfg;
  try {
    const json j = json::parse(read_file(path));
    check_keys(j, {"seed", "prior_percentage", "pipeline", "sfs", "registration", "refine"},
               path.string());
    take(j, "seed", cfg.seed);
    take(j, "prior_percentage", cfg.prior_percentage);
    PipelineConfig& pc = cfg.pipeline;
    if (j.contains("pipeline")) {
      const json& p = j["pipeline"];
      check_keys(p,
                 {"threshold", "max_iterations", "divergence_patience", "literal_prior",
                  "target_upsampling"},
                 "pipeline");
      take(p, "threshold", pc.threshold);
      take(p, "max_iterations", pc.max_iterations);
      take(p, "divergence_patience", pc.divergence_patience);
      take(p, "literal_prior", pc.literal_prior);
      take(p, "target_upsampling", pc.target_upsampling);
    }
    if (j.contains("sfs")) {
      const json& s = j["sfs"];
      check_keys(s, {"lambda_prior", "lambda_norm", "max_iterations", "restarts", "threads"},
                 "sfs");
      take(s, "lambda_prior", pc.sfs.lambda_prior);
      take(s, "lambda_norm", pc.sfs.lambda_norm);
      take(s, "max_iterations", pc.sfs.max_iterations);
      take(s, "restarts", pc.sfs.restarts);
      take(s, "threads", pc.sfs.threads);
    }
    if (j.contains("registration")) {
      const json& r = j["registration"];
      check_keys(r,
                 {"correspondence_threshold", "icp_max_iterations", "icp_tolerance",
                  "min_scale", "max_scale", "angles_deg", "coarse_iterations", "try_rms_scale",
                  "refine_candidates", "shift_rounds", "ransac_iterations", "inlier_threshold",
                  "min_sample", "min_inlier_ratio", "isotropy_tolerance"},
                 "registration");
      RegistrationConfig& rc = pc.registration;
      take(r, "correspondence_threshold", rc.correspondence_threshold);
      take(r, "icp_max_iterations", rc.initial.icp.max_iterations);
      take(r, "icp_tolerance", rc.initial.icp.tolerance);
      take(r, "min_scale", rc.initial.icp.min_scale);
      take(r, "max_scale", rc.initial.icp.max_scale);
      take(r, "angles_deg", rc.initial.angles_deg);
      take(r, "coarse_iterations", rc.initial.coarse_iterations);
      take(r, "try_rms_scale", rc.initial.try_rms_scale);
      take(r, "refine_candidates", rc.initial.refine_candidates);
      take(r, "shift_rounds", rc.initial.shift_rounds);
      take(r, "ransac_iterations", rc.ransac.iterations);
      take(r, "inlier_threshold", rc.ransac.inlier_threshold);
      take(r, "min_sample", rc.ransac.min_sample);
      take(r, "min_inlier_ratio", rc.ransac.min_inlier_ratio);
      take(r, "isotropy_tolerance", rc.ransac.isotropy_tolerance);
    }
    if (j.contains("refine")) {
      const json& f = j["refine"];
      check_keys(f, {"lambda_prior", "lambda_norm", "max_iterations", "threads"}, "refine");
      take(f, "lambda_prior", pc.refine.lambda_prior);
      take(f, "lambda_norm", pc.refine.lambda_norm);
      take(f, "max_iterations", pc.refine.max_iterations);
      take(f, "threads", pc.refine.threads);
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  cfg.pipeline.registration.ransac.seed = cfg.seed;
  validate(cfg.pipeline);
  if (cfg.prior_percentage > 1.0) throw InvalidInput("prior_percentage must be <= 1");
  return cfg;
}

}  // namespace bimodal::io
