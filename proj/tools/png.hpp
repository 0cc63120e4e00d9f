#pragma once

// RGB heatmap encoding for `craft render`.

#include <png.h>

#include <algorithm>
#include <array>
#include <csetjmp>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "craft/error.hpp"
#include "craft/rastermap.hpp"

namespace craft::png {

/// Fixed colormap: v -> (v, v^2, 1 - v), v clamped to [0, 1].
inline std::array<std::uint8_t, 3> colormap(double v) {
  v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  const auto byte = [](double x) { return static_cast<std::uint8_t>(std::lround(x * 255.0)); };
  return {byte(v), byte(v * v), byte(1.0 - v)};
}

/// 8-bit RGB PNG bytes. No time or text chunks, fixed compression settings,
/// so equal maps give equal files.
inline std::string encode_heatmap(const ScoreMap& map) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png: cannot create info struct");
  }
  std::string out;
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(map.width()) * map.height() * 3);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const auto rgb = colormap(map(x, y));
      std::copy(rgb.begin(), rgb.end(), rows.begin() + (static_cast<std::size_t>(y) * map.width() + x) * 3);
    }
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), n);
      },
      nullptr);
  png_set_compression_level(png, 9);
  png_set_IHDR(png, info, static_cast<png_uint_32>(map.width()), static_cast<png_uint_32>(map.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < map.height(); ++y) {
    png_write_row(png, rows.data() + static_cast<std::size_t>(y) * map.width() * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace craft::png
