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
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "bimodal/errors.hpp"

namespace bimodal {

/// Row-major per-pixel storage with a validity mask. Pixel (x, y) lives at
/// index y * width + x; masked-out values are never read by reductions.
template <typename V>
class Grid2D {
 public:
  using value_type = V;

  Grid2D() = default;

  Grid2D(int width, int height, const V& fill = V{}, bool valid = true)
      : width_(width),
        height_(height),
        values_(checked_size(width, height), fill),
        mask_(values_.size(), valid ? 1 : 0) {}

  Grid2D(int width, int height, std::vector<V> values, std::vector<std::uint8_t> mask)
      : width_(width), height_(height), values_(std::move(values)), mask_(std::move(mask)) {
    if (values_.size() != checked_size(width, height) || mask_.size() != values_.size())
      throw InvalidInput("Grid2D: values/mask length does not match width x height");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  int x_of(std::size_t i) const { return static_cast<int>(i % static_cast<std::size_t>(width_)); }
  int y_of(std::size_t i) const { return static_cast<int>(i / static_cast<std::size_t>(width_)); }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  V& operator()(int x, int y) { return values_[index(x, y)]; }
  const V& operator()(int x, int y) const { return values_[index(x, y)]; }
  V& operator[](std::size_t i) { return values_[i]; }
  const V& operator[](std::size_t i) const { return values_[i]; }

  bool valid(int x, int y) const { return in_bounds(x, y) && mask_[index(x, y)] != 0; }
  bool valid(std::size_t i) const { return mask_[i] != 0; }
  void set_valid(std::size_t i, bool v) { mask_[i] = v ? 1 : 0; }
  void set_valid(int x, int y, bool v) { set_valid(index(x, y), v); }

  std::size_t count_valid() const {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
  }

  std::span<V> values() { return values_; }
  std::span<const V> values() const { return values_; }
  std::span<const std::uint8_t> mask() const { return mask_; }
  std::vector<std::uint8_t>& mask_storage() { return mask_; }

  bool same_shape(int w, int h) const { return w == width_ && h == height_; }
  template <typename U>
  bool same_shape(const Grid2D<U>& other) const {
    return same_shape(other.width(), other.height());
  }

 private:
  static std::size_t checked_size(int width, int height) {
    if (width < 0 || height < 0) throw InvalidInput("Grid2D: negative dimension");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<V> values_;
  std::vector<std::uint8_t> mask_;
};

using Mask = std::vector<std::uint8_t>;

}  // namespace bimodal
