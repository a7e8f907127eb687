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

#include "acwm/io.hpp"

#include <png.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace acwm {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "WMT1 I/O assumes a little-endian host");

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  require(t.dims.size() <= 255, "too many tensor dimensions");
  const std::size_t n = t.numel();
  const std::size_t have = t.dtype == DType::kF32 ? t.f32.size() : t.u8.size();
  require(have == n, "tensor payload does not match its dims");
  std::vector<std::uint8_t> out = {'W', 'M', 'T', '1', static_cast<std::uint8_t>(t.dtype),
                                   static_cast<std::uint8_t>(t.dims.size())};
  for (std::uint32_t d : t.dims)
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(d >> (8 * b)));
  if (t.dtype == DType::kF32) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.f32.data());
    out.insert(out.end(), p, p + 4 * n);
  } else {
    out.insert(out.end(), t.u8.begin(), t.u8.end());
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), "WMT1", 4) != 0)
    throw ValidationError("not a WMT1 tensor");
  Tensor t;
  const std::uint8_t dtype = bytes[4];
  if (dtype != 1 && dtype != 2) throw ValidationError("unknown WMT1 dtype");
  t.dtype = static_cast<DType>(dtype);
  const std::size_t ndim = bytes[5];
  std::size_t pos = 6;
  if (bytes.size() < pos + 4 * ndim) throw ValidationError("truncated WMT1 header");
  for (std::size_t i = 0; i < ndim; ++i, pos += 4) {
    std::uint32_t d = 0;
    for (int b = 0; b < 4; ++b) d |= static_cast<std::uint32_t>(bytes[pos + b]) << (8 * b);
    t.dims.push_back(d);
  }
  const std::size_t n = t.numel();
  const std::size_t size = t.dtype == DType::kF32 ? 4 * n : n;
  if (bytes.size() != pos + size) throw ValidationError("WMT1 payload size mismatch");
  if (t.dtype == DType::kF32) {
    t.f32.resize(n);
    std::memcpy(t.f32.data(), bytes.data() + pos, size);
  } else {
    t.u8.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  }
  return t;
}

void write_tensor(const fs::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }

Tensor read_tensor(const fs::path& path) {
  try {
    return decode_tensor(read_file(path));
  } catch (const ValidationError& e) {
    throw IoError(path, e.what());
  }
}

Tensor tensor_from_matrix(const Eigen::MatrixXd& m) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.f32.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      t.f32[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<float>(m(r, c));
  return t;
}

Eigen::MatrixXd matrix_from_tensor(const Tensor& t) {
  require(t.dtype == DType::kF32 && t.dims.size() == 2, "expected a 2-d f32 tensor");
  Eigen::MatrixXd m(t.dims[0], t.dims[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = t.f32[static_cast<std::size_t>(r * m.cols() + c)];
  return m;
}

// PNG -------------------------------------------------------------------------

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
  png_longjmp(png, 1);
}
void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  require(!img.empty(), "cannot encode an empty image");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (png == nullptr) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encode failed: " + err);
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        auto* v = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        v->insert(v->end(), data, data + len);
      },
      nullptr);
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
  for (int r = 0; r < img.height(); ++r)
    png_write_row(png, const_cast<png_bytep>(img.bytes().data() + r * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw ValidationError("not a PNG stream");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (png == nullptr) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{bytes, 0};
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("PNG decode failed: " + err);
  }
  png_set_read_fn(png, &cursor, [](png_structp p, png_bytep data, png_size_t len) {
    auto* c = static_cast<ReadCursor*>(png_get_io_ptr(p));
    if (c->pos + len > c->bytes.size()) png_error(p, "unexpected end of data");
    std::memcpy(data, c->bytes.data() + c->pos, len);
    c->pos += len;
  });
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  img = Image(w, h);
  const std::size_t stride = static_cast<std::size_t>(w) * 3;
  for (int r = 0; r < h; ++r) png_read_row(png, img.bytes().data() + r * stride, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const fs::path& path, const Image& img) { write_file(path, encode_png(img)); }

Image read_png(const fs::path& path) {
  try {
    return decode_png(read_file(path));
  } catch (const ValidationError& e) {
    throw IoError(path, e.what());
  }
}

// Base64 ------------------------------------------------------------------------

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    for (int s = 18; s >= 0; s -= 6) out.push_back(kAlphabet[(v >> s) & 63]);
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(rest == 2 ? kAlphabet[(v >> 6) & 63] : '=');
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::array<int, 256> lut;
  lut.fill(-1);
  for (int i = 0; i < 64; ++i) lut[static_cast<unsigned char>(kAlphabet[i])] = i;
  require(text.size() % 4 == 0, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char ch = text[i + k];
      if (ch == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      const int d = lut[static_cast<unsigned char>(ch)];
      require(d >= 0 && pad == 0, "invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

// Files and JSON --------------------------------------------------------------------

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path.parent_path(), ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path, "write failed");
}

void write_text(const fs::path& path, std::string_view text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                 text.size()));
}

Json read_json(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::exception& e) {
    throw IoError(path, std::string("invalid JSON: ") + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// Trajectories -------------------------------------------------------------------------

Json trajectory_to_json(const ActionTrajectory& traj) {
  traj.validate();
  Json arms = Json::array();
  for (const ActionState& s : traj.frames.front()) arms.push_back(to_string(s.arm));
  Json actions = Json::array();
  for (const ArmFrame& f : traj.frames) {
    Json row = Json::array();
    for (const ActionState& s : f) {
      for (int i = 0; i < 3; ++i) row.push_back(s.pose.position[i]);
      for (int i = 0; i < 3; ++i) row.push_back(s.pose.rpy[i]);
      row.push_back(s.openness);
    }
    actions.push_back(std::move(row));
  }
  return Json{{"arms", arms}, {"timestamps", traj.timestamps}, {"actions", actions}};
}

ActionTrajectory trajectory_from_json(const Json& j) {
  try {
    std::vector<ArmId> arms;
    if (j.contains("arms")) {
      for (const auto& a : j.at("arms")) arms.push_back(arm_from_string(a.get<std::string>()));
    } else {
      arms = {ArmId::kRight};
    }
    require(!arms.empty(), "trajectory lists no arms");
    ActionTrajectory traj;
    const Json& actions = j.at("actions");
    require(actions.is_array(), "actions must be an array");
    for (const Json& row : actions) {
      require(row.is_array() && row.size() == 7 * arms.size(), "action row has the wrong width");
      ArmFrame f;
      for (std::size_t a = 0; a < arms.size(); ++a) {
        ActionState s;
        s.arm = arms[a];
        for (int i = 0; i < 3; ++i) s.pose.position[i] = row.at(7 * a + i).get<double>();
        for (int i = 0; i < 3; ++i) s.pose.rpy[i] = row.at(7 * a + 3 + i).get<double>();
        s.openness = row.at(7 * a + 6).get<double>();
        f.push_back(s);
      }
      traj.frames.push_back(std::move(f));
    }
    if (j.contains("timestamps")) {
      traj.timestamps = j.at("timestamps").get<std::vector<double>>();
    } else {
      for (std::size_t i = 0; i < traj.frames.size(); ++i) traj.timestamps.push_back(0.1 * i);
    }
    traj.validate();
    return traj;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed trajectory JSON: ") + e.what());
  }
}

ActionTrajectory read_trajectory(const fs::path& path) {
  try {
    return trajectory_from_json(read_json(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_trajectory(const fs::path& path, const ActionTrajectory& traj) {
  write_json(path, trajectory_to_json(traj));
}

std::vector<ArmFrame> actions_from_json(const Json& j, ArmId arm, std::size_t expected_rows) {
  require(j.is_array(), "actions must be an array");
  require(j.size() == expected_rows,
          "expected " + std::to_string(expected_rows) + " actions, got " + std::to_string(j.size()));
  std::vector<ArmFrame> out;
  for (const Json& row : j) {
    require(row.is_array() && row.size() == 7, "each action must have 7 numbers");
    ActionState s;
    s.arm = arm;
    std::array<double, 7> v{};
    for (int i = 0; i < 7; ++i) {
      require(row[i].is_number(), "action entries must be numbers");
      v[i] = row[i].get<double>();
      require(std::isfinite(v[i]), "action entries must be finite");
    }
    s.pose.position = {v[0], v[1], v[2]};
    s.pose.rpy = {v[3], v[4], v[5]};
    require(v[6] >= 0.0 && v[6] <= 1.0, "openness must lie in [0, 1]");
    s.openness = v[6];
    out.push_back({s});
  }
  return out;
}

}  // namespace acwm
