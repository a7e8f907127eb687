// Copyright 2026 The acwm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// 8-bit RGB rasters, channel-planar float tensors, and the integer raster
// primitives shared by the action-map and scene renderers.

#ifndef ACWM_IMAGE_HPP_
#define ACWM_IMAGE_HPP_

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "acwm/common.hpp"

namespace acwm {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
  bool is_black() const { return r == 0 && g == 0 && b == 0; }
};

class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {})
      : width_(width), height_(height), rgb_(static_cast<std::size_t>(width) * height * 3) {
    require(width > 0 && height > 0, "image dimensions must be positive");
    if (!fill.is_black()) this->fill(fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return rgb_.empty(); }
  bool contains(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }

  Rgb at(int row, int col) const {
    const std::size_t i = index(row, col);
    return {rgb_[i], rgb_[i + 1], rgb_[i + 2]};
  }
  void set(int row, int col, Rgb c) {
    const std::size_t i = index(row, col);
    rgb_[i] = c.r;
    rgb_[i + 1] = c.g;
    rgb_[i + 2] = c.b;
  }
  // No-op outside the image.
  void plot(int row, int col, Rgb c) {
    if (contains(row, col)) set(row, col, c);
  }
  void fill(Rgb c);

  const std::vector<std::uint8_t>& bytes() const { return rgb_; }
  std::vector<std::uint8_t>& bytes() { return rgb_; }

  std::uint64_t hash() const;
  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int row, int col) const {
    return (static_cast<std::size_t>(row) * width_ + col) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> rgb_;  // row-major, interleaved RGB
};

// Channel-planar tensor: data is channels x (height * width), row-major
// pixels within a channel row.
template <typename Scalar>
struct FeatureMap {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix data;
  int height = 0;
  int width = 0;

  FeatureMap() = default;
  FeatureMap(int channels, int h, int w) : data(Matrix::Zero(channels, h * w)), height(h), width(w) {}
  FeatureMap(Matrix m, int h, int w) : data(std::move(m)), height(h), width(w) {}

  int channels() const { return static_cast<int>(data.rows()); }
  Scalar& operator()(int c, int row, int col) { return data(c, row * width + col); }
  Scalar operator()(int c, int row, int col) const { return data(c, row * width + col); }

  template <typename Other>
  FeatureMap<Other> cast() const {
    return {data.template cast<Other>(), height, width};
  }
};

template <typename Scalar>
FeatureMap<Scalar> to_planes(const Image& img) {
  FeatureMap<Scalar> out(3, img.height(), img.width());
  const auto& b = img.bytes();
  for (int i = 0; i < img.width() * img.height(); ++i)
    for (int c = 0; c < 3; ++c) out.data(c, i) = static_cast<Scalar>(b[3 * i + c]) / Scalar(255);
  return out;
}

// Values are clamped to [0, 1] and rounded to the nearest 8-bit level.
template <typename Scalar>
Image to_image(const FeatureMap<Scalar>& planes) {
  require(planes.channels() == 3, "to_image expects three channels");
  Image img(planes.width, planes.height);
  auto& b = img.bytes();
  for (int i = 0; i < planes.width * planes.height; ++i) {
    for (int c = 0; c < 3; ++c) {
      double v = static_cast<double>(planes.data(c, i));
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      b[3 * i + c] = static_cast<std::uint8_t>(v * 255.0 + 0.5);
    }
  }
  return img;
}

// Mean absolute difference per channel value, in [0, 1] units.
double mean_abs_diff(const Image& a, const Image& b);

// Integer raster primitives -------------------------------------------------

// Bresenham segment between pixel (x0, y0) and (x1, y1), clipped to the image.
void draw_line(Image& img, int x0, int y0, int x1, int y1, Rgb color);

// Disk of integer radius around pixel (cx, cy): every pixel with
// dx^2 + dy^2 <= r^2 + r.
void fill_circle(Image& img, int cx, int cy, int radius, Rgb color);

// Convex polygon (pixel-center inclusion test, vertices in continuous pixel
// coordinates, any winding).
void fill_convex_polygon(Image& img, const std::vector<Eigen::Vector2d>& vertices, Rgb color);

Rgb scale(Rgb c, int level);  // c * level / 255, level in [0, 255]

}  // namespace acwm

#endif  // ACWM_IMAGE_HPP_
