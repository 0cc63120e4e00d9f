#pragma once

// Single-channel real-valued grids (score maps), bilinear sampling, stroke
// drawing and the CRMAP1 container.
//
// CRMAP1 layout: an ASCII header line "CRMAP1 <width> <height> <channels>\n"
// followed by the channels stored planar, each row-major, as little-endian
// IEEE-754 binary32.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "craft/error.hpp"
#include "craft/geometry.hpp"

namespace craft {

struct Shape {
  int width = 0;
  int height = 0;

  friend bool operator==(Shape, Shape) = default;
  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
};

/// Row-major 2D grid. `Map<float>` is the stored score map; `Map<double>` is
/// used where finite differences need the extra precision.
template <class T>
class Map {
 public:
  using value_type = T;

  Map() = default;
  Map(int width, int height, T fill = T{0}) : shape_{width, height} {
    if (width <= 0 || height <= 0) throw InvalidArgument("Map: dimensions must be positive");
    data_.assign(shape_.pixels(), fill);
  }
  explicit Map(Shape s, T fill = T{0}) : Map(s.width, s.height, fill) {}

  int width() const { return shape_.width; }
  int height() const { return shape_.height; }
  Shape shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < shape_.width && y < shape_.height;
  }
  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  template <class U>
  Map<U> cast() const {
    Map<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.values().begin(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Map&, const Map&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * shape_.width + x;
  }

  Shape shape_;
  std::vector<T> data_;
};

using ScoreMap = Map<float>;

/// One bit per pixel, stored as bytes.
using BinaryMap = Map<std::uint8_t>;

/// Bilinear interpolation. Pixel (i, j) sits at real coordinates (i, j);
/// anything outside [0, w-1] x [0, h-1] samples as 0.
template <class T>
double sample_bilinear(const Map<T>& map, double x, double y) {
  // Round-off from a coordinate transform must not push an edge sample out.
  constexpr double eps = 1e-9;
  if (!(x >= -eps && y >= -eps && x <= map.width() - 1 + eps && y <= map.height() - 1 + eps)) return 0.0;
  x = std::clamp(x, 0.0, map.width() - 1.0);
  y = std::clamp(y, 0.0, map.height() - 1.0);
  const int x0 = std::min(static_cast<int>(x), map.width() - 1);
  const int y0 = std::min(static_cast<int>(y), map.height() - 1);
  const int x1 = std::min(x0 + 1, map.width() - 1);
  const int y1 = std::min(y0 + 1, map.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * map(x0, y0) + fx * map(x1, y0);
  const double bottom = (1.0 - fx) * map(x0, y1) + fx * map(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

/// Distance from `p` to the segment [a, b].
inline double point_segment_distance(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + ab * t);
}

/// In-place variant of draw_segment for builders that own the map.
template <class T>
void paint_segment(Map<T>& map, Point p0, Point p1, double thickness, double value) {
  if (!(thickness >= 1.0)) throw InvalidArgument("draw_segment: thickness must be >= 1");
  const T v = static_cast<T>(std::clamp(value, 0.0, 1.0));
  const double r = thickness * 0.5;
  const int x_lo = std::max(0, static_cast<int>(std::floor(std::min(p0.x, p1.x) - r)));
  const int x_hi = std::min(map.width() - 1, static_cast<int>(std::ceil(std::max(p0.x, p1.x) + r)));
  const int y_lo = std::max(0, static_cast<int>(std::floor(std::min(p0.y, p1.y) - r)));
  const int y_hi = std::min(map.height() - 1, static_cast<int>(std::ceil(std::max(p0.y, p1.y) + r)));
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      if (point_segment_distance(Point{double(x), double(y)}, p0, p1) <= r) {
        T& cell = map(x, y);
        cell = std::max(cell, v);
      }
    }
  }
}

/// Paints every pixel whose center is within thickness/2 of [p0, p1] with
/// max(existing, value). A zero-length segment paints a disc.
template <class T>
Map<T> draw_segment(Map<T> map, Point p0, Point p1, double thickness, double value) {
  paint_segment(map, p0, p1, thickness, value);
  return map;
}

// ---------------------------------------------------------------------------
// CRMAP1 container

inline constexpr std::string_view kCrmapMagic = "CRMAP1";

namespace detail {

inline std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace detail

inline std::string encode_maps(std::span<const ScoreMap> maps) {
  if (maps.empty()) throw FormatError("CRMAP1: nothing to write");
  const Shape shape = maps.front().shape();
  for (const ScoreMap& m : maps) {
    if (m.shape() != shape) throw FormatError("CRMAP1: channel dimension mismatch");
  }
  std::string out = std::string(kCrmapMagic) + " " + std::to_string(shape.width) + " " +
                    std::to_string(shape.height) + " " + std::to_string(maps.size()) + "\n";
  const std::size_t header = out.size();
  out.resize(header + maps.size() * shape.pixels() * 4);
  char* cursor = out.data() + header;
  for (const ScoreMap& m : maps) {
    for (float v : m.values()) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      bits = detail::to_little_endian(bits);
      std::memcpy(cursor, &bits, 4);
      cursor += 4;
    }
  }
  return out;
}

inline std::vector<ScoreMap> decode_maps(std::string_view bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string_view::npos || newline > 64) {
    throw FormatError("CRMAP1: missing header line");
  }
  std::istringstream header{std::string(bytes.substr(0, newline))};
  std::string magic;
  long long width = 0, height = 0, channels = 0;
  header >> magic >> width >> height >> channels;
  if (magic != kCrmapMagic) throw FormatError("CRMAP1: bad magic");
  std::string rest;
  if (!header || (header >> rest, !rest.empty())) throw FormatError("CRMAP1: malformed header");
  if (width <= 0 || height <= 0 || channels <= 0 || width > (1 << 20) || height > (1 << 20) ||
      channels > 4096) {
    throw FormatError("CRMAP1: invalid dimensions");
  }
  const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t expected = pixels * static_cast<std::size_t>(channels) * 4;
  const std::string_view payload = bytes.substr(newline + 1);
  if (payload.size() < expected) throw FormatError("CRMAP1: truncated payload");
  if (payload.size() > expected) throw FormatError("CRMAP1: trailing bytes after payload");

  std::vector<ScoreMap> maps;
  maps.reserve(static_cast<std::size_t>(channels));
  const char* cursor = payload.data();
  for (long long c = 0; c < channels; ++c) {
    ScoreMap m(static_cast<int>(width), static_cast<int>(height));
    for (float& v : m.values()) {
      std::uint32_t bits;
      std::memcpy(&bits, cursor, 4);
      v = std::bit_cast<float>(detail::to_little_endian(bits));
      cursor += 4;
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_map(std::span<const ScoreMap> maps, const std::filesystem::path& path) {
  write_file_atomic(path, encode_maps(maps));
}

inline std::vector<ScoreMap> read_map(const std::filesystem::path& path) {
  try {
    return decode_maps(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace craft
