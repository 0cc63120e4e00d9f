#pragma once

// Deterministic synthetic scenes: geometric character boxes grouped into
// words (horizontal, rotated or bent along a circular arc) together with the
// detector maps a perfect detector would output for them.
//
// Randomness comes from SplitMix64 so scenes can be reproduced bit for bit
// in any language:
//
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// uniform() = (next() >> 11) * 2^-53; uniform_int(lo, hi) = lo + next() %
// (hi - lo + 1); normal() is Box-Muller on (1 - uniform(), uniform()) using
// the cosine branch only. Word geometry draws from a stream seeded with
// `seed`; map noise from a second stream seeded with seed ^ kNoiseStream.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "craft/error.hpp"
#include "craft/geometry.hpp"
#include "craft/gtgen.hpp"
#include "craft/rastermap.hpp"

namespace craft {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next() % span);
  }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

inline constexpr std::uint64_t kNoiseStream = 0x6E6F6973655F3031ULL;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(Range, Range) = default;
};

enum class Layout { kHorizontal, kRotated, kArc };

struct LayoutSet {
  bool horizontal = true;
  std::optional<Range> rotated = Range{-75.0 * std::numbers::pi / 180.0, 75.0 * std::numbers::pi / 180.0};
  std::optional<Range> arc_radius = Range{80.0, 160.0};  ///< pixels

  std::vector<Layout> enabled() const {
    std::vector<Layout> out;
    if (horizontal) out.push_back(Layout::kHorizontal);
    if (rotated) out.push_back(Layout::kRotated);
    if (arc_radius) out.push_back(Layout::kArc);
    return out;
  }
};

struct SceneConfig {
  int width = 512;
  int height = 512;
  int n_words = 5;
  Range char_size{14.0, 28.0};  ///< character height, pixels
  LayoutSet layouts;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  int min_chars = 3;
  int max_chars = 8;
  GtConfig gt;

  void validate() const {
    if (width <= 0 || height <= 0) throw InvalidArgument("SceneConfig: dimensions must be > 0");
    if (n_words < 0) throw InvalidArgument("SceneConfig: n_words must be >= 0");
    if (!(char_size.lo > 0.0 && char_size.lo <= char_size.hi)) {
      throw InvalidArgument("SceneConfig: empty char_size range");
    }
    if (layouts.rotated && !(layouts.rotated->lo <= layouts.rotated->hi)) {
      throw InvalidArgument("SceneConfig: empty rotation range");
    }
    if (layouts.arc_radius && !(layouts.arc_radius->lo > 0.0 && layouts.arc_radius->lo <= layouts.arc_radius->hi)) {
      throw InvalidArgument("SceneConfig: empty arc radius range");
    }
    if (n_words > 0 && layouts.enabled().empty()) throw InvalidArgument("SceneConfig: no layout enabled");
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("SceneConfig: noise_sigma must be >= 0");
    if (min_chars < 1 || max_chars < min_chars) throw InvalidArgument("SceneConfig: bad char count range");
    gt.validate();
  }
};

struct Scene {
  SceneConfig config;
  std::vector<WordAnnotation> words;
  DetectorMaps maps;
};

inline constexpr std::string_view kTranscriptionAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789";

/// Quad of a character centered at `c` with reading angle `theta`.
inline Quad char_quad(Point c, double theta, double width, double height) {
  const Point u = direction(theta) * (width * 0.5);
  const Point v = up_direction(theta) * (height * 0.5);
  return Quad{{c - u + v, c + u + v, c + u - v, c - u - v}};
}

/// Polygon through the character boundaries: the outer corners of the end
/// characters and the midpoints between neighbouring characters' corners.
inline TextPolygon word_polygon(std::span<const CharBox> chars) {
  TextPolygon poly;
  const std::size_t n = chars.size();
  if (n == 0) return poly;
  poly.top.push_back(chars[0].quad.corners[0]);
  poly.bottom.push_back(chars[0].quad.corners[3]);
  for (std::size_t i = 1; i < n; ++i) {
    poly.top.push_back(midpoint(chars[i - 1].quad.corners[1], chars[i].quad.corners[0]));
    poly.bottom.push_back(midpoint(chars[i - 1].quad.corners[2], chars[i].quad.corners[3]));
  }
  poly.top.push_back(chars[n - 1].quad.corners[1]);
  poly.bottom.push_back(chars[n - 1].quad.corners[2]);
  return poly;
}

namespace detail {

struct Bounds {
  double x0, y0, x1, y1;
  bool overlaps(const Bounds& o, double gap) const {
    return x0 - gap < o.x1 && o.x0 - gap < x1 && y0 - gap < o.y1 && o.y0 - gap < y1;
  }
};

inline Bounds word_bounds(const WordAnnotation& w) {
  Bounds b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const CharBox& c : w.chars) {
    for (const Point& p : c.quad.corners) {
      b.x0 = std::min(b.x0, p.x), b.y0 = std::min(b.y0, p.y);
      b.x1 = std::max(b.x1, p.x), b.y1 = std::max(b.y1, p.y);
    }
  }
  return b;
}

inline WordAnnotation translate(WordAnnotation w, Point offset) {
  for (CharBox& c : w.chars) {
    for (Point& p : c.quad.corners) p = p + offset;
  }
  if (w.polygon) {
    for (Point& p : w.polygon->top) p = p + offset;
    for (Point& p : w.polygon->bottom) p = p + offset;
  }
  return w;
}

// Word laid out around the origin.
inline WordAnnotation draw_word_shape(SplitMix64& rng, const SceneConfig& cfg) {
  const auto layouts = cfg.layouts.enabled();
  const Layout layout = layouts[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(layouts.size()) - 1))];
  const auto n = static_cast<int>(rng.uniform_int(cfg.min_chars, cfg.max_chars));
  const double height = rng.uniform(cfg.char_size.lo, cfg.char_size.hi);
  const double width = height * rng.uniform(0.7, 1.0);
  const double pitch = width * rng.uniform(1.05, 1.25);

  WordAnnotation w;
  for (int i = 0; i < n; ++i) {
    w.transcription.push_back(kTranscriptionAlphabet[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(kTranscriptionAlphabet.size()) - 1))]);
  }
  const double mid = 0.5 * (n - 1);
  if (layout == Layout::kArc) {
    // Keep the whole word within a quarter turn of the circle.
    const double min_radius = std::max(3.0 * height, (n - 1) * pitch / (std::numbers::pi / 2));
    const double radius = std::max(rng.uniform(cfg.layouts.arc_radius->lo, cfg.layouts.arc_radius->hi), min_radius);
    const bool bulges_up = rng.uniform() < 0.5;
    const double step = pitch / radius;
    // Circle center sits at the origin offset so the middle character lands on (0, 0).
    const Point center = bulges_up ? Point{0, radius} : Point{0, -radius};
    for (int i = 0; i < n; ++i) {
      const double psi = (i - mid) * step;
      const Point c = bulges_up ? center + Point{std::sin(psi), -std::cos(psi)} * radius
                                : center + Point{std::sin(psi), std::cos(psi)} * radius;
      const double theta = bulges_up ? psi : -psi;
      w.chars.push_back(CharBox{char_quad(c, theta, width, height), theta});
    }
  } else {
    const double theta =
        layout == Layout::kRotated ? rng.uniform(cfg.layouts.rotated->lo, cfg.layouts.rotated->hi) : 0.0;
    const Point d = direction(theta);
    for (int i = 0; i < n; ++i) {
      w.chars.push_back(CharBox{char_quad(d * ((i - mid) * pitch), theta, width, height), theta});
    }
  }
  w.polygon = word_polygon(w.chars);
  return w;
}

}  // namespace detail

/// Minimum clearance between the bounding boxes of two words.
inline double word_gap(const SceneConfig& cfg) {
  const double diag = std::hypot(cfg.char_size.hi, cfg.char_size.hi);
  return std::max(2.0 * link_thickness(diag, diag, cfg.gt.alpha), 4.0);
}

inline constexpr int kPlacementAttempts = 1000;

inline Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  SplitMix64 rng(cfg.seed);
  Scene scene;
  scene.config = cfg;
  const double gap = word_gap(cfg);
  const double margin = 2.0;
  std::vector<detail::Bounds> placed;
  for (int k = 0; k < cfg.n_words; ++k) {
    bool done = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !done; ++attempt) {
      WordAnnotation w = detail::draw_word_shape(rng, cfg);
      const detail::Bounds b = detail::word_bounds(w);
      const double free_x = (cfg.width - 1 - 2 * margin) - (b.x1 - b.x0);
      const double free_y = (cfg.height - 1 - 2 * margin) - (b.y1 - b.y0);
      if (free_x < 0 || free_y < 0) continue;
      const Point offset{margin - b.x0 + rng.uniform(0.0, free_x), margin - b.y0 + rng.uniform(0.0, free_y)};
      w = detail::translate(std::move(w), offset);
      const detail::Bounds moved = detail::word_bounds(w);
      if (std::any_of(placed.begin(), placed.end(),
                      [&](const detail::Bounds& o) { return o.overlaps(moved, gap); })) {
        continue;
      }
      placed.push_back(moved);
      scene.words.push_back(std::move(w));
      done = true;
    }
    if (!done) {
      throw PlacementFailure("generate_scene: could not place word " + std::to_string(k) + " after " +
                             std::to_string(kPlacementAttempts) + " attempts");
    }
  }

  const Shape shape{cfg.width, cfg.height};
  scene.maps = render_detector_maps(scene.words, shape, cfg.gt);
  if (cfg.noise_sigma > 0.0) {
    SplitMix64 noise(cfg.seed ^ kNoiseStream);
    for (ScoreMap* m : {&scene.maps.region, &scene.maps.link, &scene.maps.sin, &scene.maps.cos}) {
      for (float& v : m->values()) {
        v = static_cast<float>(std::clamp(v + cfg.noise_sigma * noise.normal(), 0.0, 1.0));
      }
    }
  }
  return scene;
}

/// Number of Unicode code points in a UTF-8 string.
inline int utf8_length(std::string_view s) {
  return static_cast<int>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

/// Ground-truth character count of every word, in scene order.
inline std::vector<int> character_count_oracle(const Scene& scene) {
  std::vector<int> out;
  for (const WordAnnotation& w : scene.words) out.push_back(utf8_length(w.transcription));
  return out;
}

}  // namespace craft
