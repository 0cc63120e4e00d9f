#pragma once

// Ground-truth detector maps from character-level annotations.
//
//   region : per-character Gaussian on the unit square, warped onto the
//            character quad and max-composited
//   link   : center line between adjacent characters of a word, thickness
//            max((d1 + d2) / 2 * alpha, 1) with d the character diagonals
//   sin/cos: (sin t + 1) / 2 and (cos t + 1) / 2 of the character angle,
//            0.5 where no word is present
//
// plus the line-level link map used to train a link refiner from polygon
// annotations.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "craft/geometry.hpp"
#include "craft/rastermap.hpp"

namespace craft {

struct CharBox {
  Quad quad;
  double theta = 0.0;  ///< reading-direction angle of the box, radians
};

/// Builds a CharBox whose angle is read off the quad's edges.
inline CharBox make_char_box(const Quad& q) { return CharBox{q, quad_angle(q)}; }

inline bool angle_consistent(const CharBox& c, double tol = 1e-6) {
  return std::abs(wrap_pi(c.theta - quad_angle(c.quad))) <= tol;
}

struct WordAnnotation {
  std::string transcription;
  std::vector<CharBox> chars;
  std::optional<TextPolygon> polygon;
};

struct DetectorMaps {
  ScoreMap region;
  ScoreMap link;
  ScoreMap sin;
  ScoreMap cos;

  Shape shape() const { return region.shape(); }
  bool consistent() const {
    return link.shape() == region.shape() && sin.shape() == region.shape() &&
           cos.shape() == region.shape();
  }
  std::vector<ScoreMap> channels() const { return {region, link, sin, cos}; }
  static DetectorMaps from_channels(std::vector<ScoreMap> c) {
    if (c.size() != 4) throw FormatError("detector maps need exactly 4 channels");
    DetectorMaps m{std::move(c[0]), std::move(c[1]), std::move(c[2]), std::move(c[3])};
    if (!m.consistent()) throw FormatError("detector map channels differ in size");
    return m;
  }
  friend bool operator==(const DetectorMaps&, const DetectorMaps&) = default;
};

/// Standard deviation of the region Gaussian in unit-square coordinates.
/// The value at an edge midpoint is exp(-2) ~ 0.135 of the peak.
inline constexpr double kGaussianSigma = 0.25;

struct GtConfig {
  double alpha = 0.1;                   ///< link thickness coefficient
  double gaussian_peak = 1.0;
  /// Effective radius of a stamp as a fraction of the character size; two
  /// characters closer than this radius merge into one peak at half height.
  double gaussian_radius_ratio = 0.45;
  double linkrefiner_beta = 0.3;        ///< line-level link width coefficient

  void validate() const {
    if (!(alpha > 0.0)) throw InvalidArgument("GtConfig: alpha must be > 0");
    if (!(gaussian_peak > 0.0)) throw InvalidArgument("GtConfig: gaussian_peak must be > 0");
    if (!(gaussian_radius_ratio > 0.0 && gaussian_radius_ratio <= std::sqrt(0.5))) {
      throw InvalidArgument("GtConfig: gaussian_radius_ratio must be in (0, sqrt(1/2)]");
    }
    if (!(linkrefiner_beta > 0.0)) throw InvalidArgument("GtConfig: linkrefiner_beta must be > 0");
  }
};

/// Link stroke thickness for two adjacent characters with diagonals d1, d2.
/// Width of the region support of a character of size `char_size`.
inline double gaussian_support_width(double char_size, const GtConfig& cfg = {}) {
  return 2.0 * cfg.gaussian_radius_ratio * char_size;
}

inline double link_thickness(double d1, double d2, double alpha) {
  return std::max((d1 + d2) / 2 * alpha, 1.0);
}

/// Region stamp evaluated at unit-square coordinates (u, v); zero outside
/// the square.
inline double gaussian_stamp(double u, double v, const GtConfig& cfg) {
  // Pixels on a character edge may land a rounding error outside.
  constexpr double eps = 1e-9;
  if (!(u >= -eps && u <= 1.0 + eps && v >= -eps && v <= 1.0 + eps)) return 0.0;
  const double d2 = (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5);
  return cfg.gaussian_peak * std::exp(-d2 / (2.0 * kGaussianSigma * kGaussianSigma));
}

namespace detail {

struct PixelRange {
  int x_lo, x_hi, y_lo, y_hi;
  bool empty() const { return x_lo > x_hi || y_lo > y_hi; }
};

inline PixelRange pixel_range(std::span<const Point> pts, Shape shape) {
  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  for (const Point& p : pts) {
    min_x = std::min(min_x, p.x), max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y), max_y = std::max(max_y, p.y);
  }
  const auto lo = [](double v, int limit) {
    return static_cast<int>(std::clamp(std::ceil(v), 0.0, static_cast<double>(limit) + 1.0));
  };
  const auto hi = [](double v, int limit) {
    return static_cast<int>(std::clamp(std::floor(v), -1.0, static_cast<double>(limit)));
  };
  return {lo(min_x, shape.width - 1), hi(max_x, shape.width - 1), lo(min_y, shape.height - 1),
          hi(max_y, shape.height - 1)};
}

/// Calls fn(x, y) for every pixel center inside `poly`.
template <class Fn>
void for_each_pixel_inside(std::span<const Point> poly, Shape shape, Fn&& fn) {
  if (poly.size() < 3) return;
  const PixelRange r = pixel_range(poly, shape);
  if (r.empty()) return;
  for (int y = r.y_lo; y <= r.y_hi; ++y) {
    for (int x = r.x_lo; x <= r.x_hi; ++x) {
      if (contains(poly, Point{double(x), double(y)})) fn(x, y);
    }
  }
}

}  // namespace detail

/// Max-composites the warped Gaussian of one character quad into `map`.
inline void stamp_character(ScoreMap& map, const Quad& quad, const GtConfig& cfg) {
  if (!(area(quad.corners) > 0.0)) return;
  Homography to_unit;
  try {
    to_unit = quad_homography(quad, unit_square());
  } catch (const SingularSystem&) {
    return;
  }
  const detail::PixelRange r = detail::pixel_range(quad.corners, map.shape());
  if (r.empty()) return;
  for (int y = r.y_lo; y <= r.y_hi; ++y) {
    for (int x = r.x_lo; x <= r.x_hi; ++x) {
      const Point uv = to_unit(Point{double(x), double(y)});
      const double g = std::clamp(gaussian_stamp(uv.x, uv.y, cfg), 0.0, 1.0);
      float& cell = map(x, y);
      cell = std::max(cell, static_cast<float>(g));
    }
  }
}

inline ScoreMap region_gt(std::span<const CharBox> chars, Shape shape, const GtConfig& cfg = {}) {
  cfg.validate();
  ScoreMap map(shape);
  for (const CharBox& c : chars) stamp_character(map, c.quad, cfg);
  return map;
}

inline ScoreMap region_gt(std::span<const WordAnnotation> words, Shape shape,
                          const GtConfig& cfg = {}) {
  cfg.validate();
  ScoreMap map(shape);
  for (const WordAnnotation& w : words) {
    for (const CharBox& c : w.chars) stamp_character(map, c.quad, cfg);
  }
  return map;
}

inline ScoreMap link_gt(std::span<const WordAnnotation> words, Shape shape,
                        const GtConfig& cfg = {}) {
  cfg.validate();
  ScoreMap map(shape);
  for (const WordAnnotation& w : words) {
    for (std::size_t i = 0; i + 1 < w.chars.size(); ++i) {
      const Quad& a = w.chars[i].quad;
      const Quad& b = w.chars[i + 1].quad;
      const double t = link_thickness(quad_diagonal(a), quad_diagonal(b), cfg.alpha);
      paint_segment(map, quad_center(a), quad_center(b), t, 1.0);
    }
  }
  return map;
}

struct OrientationEncoding {
  double sin;
  double cos;
};

inline OrientationEncoding encode_orientation(double theta) {
  return {(std::sin(theta) + 1.0) * 0.5, (std::cos(theta) + 1.0) * 0.5};
}

/// Circular mean of the character angles of a word.
inline double mean_angle(const WordAnnotation& w) {
  double s = 0.0, c = 0.0;
  for (const CharBox& ch : w.chars) s += std::sin(ch.theta), c += std::cos(ch.theta);
  return std::atan2(s, c);
}

/// Region a word occupies: its polygon when annotated, else the convex hull
/// of its character corners.
inline Polygon word_region(const WordAnnotation& w) {
  if (w.polygon) return w.polygon->outline();
  std::vector<Point> pts;
  for (const CharBox& c : w.chars) pts.insert(pts.end(), c.quad.corners.begin(), c.quad.corners.end());
  return convex_hull(std::move(pts));
}

struct OrientationMaps {
  ScoreMap sin;
  ScoreMap cos;
};

inline OrientationMaps orientation_gt(std::span<const WordAnnotation> words, Shape shape) {
  OrientationMaps out{ScoreMap(shape, 0.5f), ScoreMap(shape, 0.5f)};
  const auto fill = [&](std::span<const Point> poly, double theta) {
    const OrientationEncoding e = encode_orientation(theta);
    detail::for_each_pixel_inside(poly, shape, [&](int x, int y) {
      out.sin(x, y) = static_cast<float>(e.sin);
      out.cos(x, y) = static_cast<float>(e.cos);
    });
  };
  for (const WordAnnotation& w : words) {
    if (w.chars.empty()) continue;
    fill(word_region(w), mean_angle(w));
    for (const CharBox& c : w.chars) fill(c.quad.corners, c.theta);
  }
  return out;
}

/// Line-level link map: consecutive centers of paired control points joined
/// by strokes whose width is proportional to the local top-bottom distance.
inline ScoreMap linkrefiner_gt(std::span<const TextPolygon> polygons, Shape shape,
                               double beta = 0.3) {
  if (!(beta > 0.0)) throw InvalidArgument("linkrefiner_gt: beta must be > 0");
  ScoreMap map(shape);
  for (const TextPolygon& poly : polygons) {
    poly.validate();
    for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
      const double h0 = distance(poly.top[i], poly.bottom[i]);
      const double h1 = distance(poly.top[i + 1], poly.bottom[i + 1]);
      const double t = std::max(beta * (h0 + h1) / 2, 1.0);
      paint_segment(map, midpoint(poly.top[i], poly.bottom[i]),
                    midpoint(poly.top[i + 1], poly.bottom[i + 1]), t, 1.0);
    }
  }
  return map;
}

/// All four detector channels for a set of words.
inline DetectorMaps render_detector_maps(std::span<const WordAnnotation> words, Shape shape,
                                         const GtConfig& cfg = {}) {
  OrientationMaps o = orientation_gt(words, shape);
  return DetectorMaps{region_gt(words, shape, cfg), link_gt(words, shape, cfg), std::move(o.sin),
                      std::move(o.cos)};
}

}  // namespace craft
