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

#include "acwm/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace acwm {

void Image::fill(Rgb c) {
  for (std::size_t i = 0; i < rgb_.size(); i += 3) {
    rgb_[i] = c.r;
    rgb_[i + 1] = c.g;
    rgb_[i + 2] = c.b;
  }
}

std::uint64_t Image::hash() const {
  std::uint64_t h = fnv1a_pod(width_, 0xcbf29ce484222325ULL);
  h = fnv1a_pod(height_, h);
  return fnv1a(rgb_, h);
}

double mean_abs_diff(const Image& a, const Image& b) {
  require(a.width() == b.width() && a.height() == b.height(), "image sizes differ");
  const auto& x = a.bytes();
  const auto& y = b.bytes();
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) total += std::abs(int(x[i]) - int(y[i]));
  return static_cast<double>(total) / (255.0 * static_cast<double>(x.size()));
}

void draw_line(Image& img, int x0, int y0, int x1, int y1, Rgb color) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  // Long segments towards a far-off projection are clipped by plot(); cap the
  // walk so a near-singular projection cannot stall the renderer.
  int guard = 4 * (img.width() + img.height()) + std::max(dx, -dy) + 1;
  while (guard-- > 0) {
    img.plot(y0, x0, color);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void fill_circle(Image& img, int cx, int cy, int radius, Rgb color) {
  const int limit = radius * radius + radius;
  for (int dy = -radius; dy <= radius; ++dy) {
    const int row = cy + dy;
    if (row < 0 || row >= img.height()) continue;
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= limit) img.plot(row, cx + dx, color);
  }
}

void fill_convex_polygon(Image& img, const std::vector<Eigen::Vector2d>& vertices, Rgb color) {
  if (vertices.size() < 3) return;
  double min_x = vertices[0].x(), max_x = min_x, min_y = vertices[0].y(), max_y = min_y;
  double area2 = 0.0;
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const auto& p = vertices[i];
    const auto& q = vertices[(i + 1) % vertices.size()];
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
    area2 += p.x() * q.y() - q.x() * p.y();
  }
  if (area2 == 0.0) return;
  const double orient = area2 > 0 ? 1.0 : -1.0;
  const int c0 = std::max(0, static_cast<int>(std::floor(min_x)));
  const int c1 = std::min(img.width() - 1, static_cast<int>(std::ceil(max_x)));
  const int r0 = std::max(0, static_cast<int>(std::floor(min_y)));
  const int r1 = std::min(img.height() - 1, static_cast<int>(std::ceil(max_y)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double px = c + 0.5, py = r + 0.5;
      bool inside = true;
      for (std::size_t i = 0; i < vertices.size() && inside; ++i) {
        const auto& p = vertices[i];
        const auto& q = vertices[(i + 1) % vertices.size()];
        const double cross = (q.x() - p.x()) * (py - p.y()) - (q.y() - p.y()) * (px - p.x());
        inside = cross * orient >= 0.0;
      }
      if (inside) img.set(r, c, color);
    }
  }
}

Rgb scale(Rgb c, int level) {
  level = std::clamp(level, 0, 255);
  auto s = [level](std::uint8_t v) { return static_cast<std::uint8_t>((v * level + 127) / 255); };
  return {s(c.r), s(c.g), s(c.b)};
}

}  // namespace acwm
