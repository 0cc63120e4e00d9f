#pragma once

// Thin-plate-spline rectification of text instances.
//
// A word is described by 20 control points (10 along its top boundary, 10
// along its bottom, index-paired). Each refinement iteration warps the score
// maps onto a canonical horizontal grid, re-reads the text band from the
// warped region map column by column, and maps the new band edges back to
// image coordinates.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "craft/error.hpp"
#include "craft/geometry.hpp"
#include "craft/gtgen.hpp"
#include "craft/rastermap.hpp"

namespace craft {

/// Radial basis U(r) = r^2 ln r^2, evaluated from the squared distance.
inline double tps_kernel(double r2) { return r2 > 0.0 ? r2 * std::log(r2) : 0.0; }

class TpsTransform {
 public:
  /// Fits T with T(src[i]) ~ dst[i]. With `reg == 0` the fit interpolates;
  /// `reg > 0` adds reg * I to the kernel block (smoothing spline).
  static TpsTransform fit(std::span<const Point> src, std::span<const Point> dst, double reg = 0.0) {
    if (src.size() != dst.size()) throw InvalidArgument("tps_fit: point counts differ");
    if (src.size() < 3) throw InvalidArgument("tps_fit: need at least 3 control points");
    if (!(reg >= 0.0)) throw InvalidArgument("tps_fit: regularization must be >= 0");

    TpsTransform t;
    t.reg_ = reg;
    t.origin_ = centroid_of_vertices(src);
    double rms = 0.0;
    for (const Point& p : src) rms += dot(p - t.origin_, p - t.origin_);
    rms = std::sqrt(rms / static_cast<double>(src.size()));
    t.scale_ = rms > 0.0 ? rms : 1.0;
    for (const Point& p : src) t.nodes_.push_back(t.normalize(p));

    const auto n = static_cast<Eigen::Index>(src.size());
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(n + 3, n + 3);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Point pi = t.nodes_[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < n; ++j) {
        const Point d = pi - t.nodes_[static_cast<std::size_t>(j)];
        system(i, j) = tps_kernel(dot(d, d));
      }
      system(i, i) += reg;
      system(i, n) = system(n, i) = 1.0;
      system(i, n + 1) = system(n + 1, i) = pi.x;
      system(i, n + 2) = system(n + 2, i) = pi.y;
      rhs(i, 0) = dst[static_cast<std::size_t>(i)].x;
      rhs(i, 1) = dst[static_cast<std::size_t>(i)].y;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (lu.rank() < n + 3) throw SingularSystem("tps_fit: degenerate control point configuration");
    const Eigen::MatrixXd sol = lu.solve(rhs);
    t.weights_ = sol.topRows(n);
    t.affine_ = sol.bottomRows(3);
    return t;
  }

  Point apply(Point p) const {
    const Point q = normalize(p);
    double x = affine_(0, 0) + affine_(1, 0) * q.x + affine_(2, 0) * q.y;
    double y = affine_(0, 1) + affine_(1, 1) * q.x + affine_(2, 1) * q.y;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Point d = q - nodes_[i];
      const double u = tps_kernel(dot(d, d));
      x += weights_(static_cast<Eigen::Index>(i), 0) * u;
      y += weights_(static_cast<Eigen::Index>(i), 1) * u;
    }
    return {x, y};
  }
  Point operator()(Point p) const { return apply(p); }

  /// Kernel weights, one row per control point (x and y outputs).
  const Eigen::MatrixX2d& weights() const { return weights_; }

  /// Affine part in image coordinates: rows are the constant, x and y
  /// coefficients; columns the x and y outputs.
  Eigen::Matrix<double, 3, 2> affine() const {
    Eigen::Matrix<double, 3, 2> a;
    a.row(1) = affine_.row(1) / scale_;
    a.row(2) = affine_.row(2) / scale_;
    a.row(0) = affine_.row(0) - origin_.x * a.row(1) - origin_.y * a.row(2);
    return a;
  }

  /// Control points in image coordinates.
  std::vector<Point> control_points() const {
    std::vector<Point> out;
    for (const Point& q : nodes_) out.push_back(origin_ + q * scale_);
    return out;
  }

  double regularization() const { return reg_; }

 private:
  Point normalize(Point p) const { return (p - origin_) / scale_; }

  Point origin_;
  double scale_ = 1.0;
  double reg_ = 0.0;
  std::vector<Point> nodes_;  // normalized control points
  Eigen::MatrixX2d weights_;
  Eigen::Matrix<double, 3, 2> affine_;
};

inline TpsTransform tps_fit(std::span<const Point> src, std::span<const Point> dst,
                            double reg = 0.0) {
  return TpsTransform::fit(src, dst, reg);
}

/// Backward warp: output(x, y) = map sampled at T(x, y).
template <class T>
Map<T> tps_warp(const Map<T>& map, const TpsTransform& t, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw InvalidArgument("tps_warp: output dimensions must be > 0");
  Map<T> out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const Point src = t(Point{double(x), double(y)});
      out(x, y) = static_cast<T>(sample_bilinear(map, src.x, src.y));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Control points

inline constexpr std::size_t kControlPairs = 10;

struct ControlPointSet {
  std::array<Point, kControlPairs> top{};
  std::array<Point, kControlPairs> bottom{};

  /// Top points followed by bottom points.
  std::vector<Point> flattened() const {
    std::vector<Point> out(top.begin(), top.end());
    out.insert(out.end(), bottom.begin(), bottom.end());
    return out;
  }
  TextPolygon polygon() const {
    return TextPolygon{{top.begin(), top.end()}, {bottom.begin(), bottom.end()}};
  }
  double mean_height() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < kControlPairs; ++i) acc += distance(top[i], bottom[i]);
    return acc / kControlPairs;
  }
  double mean_length() const {
    return 0.5 * (polyline_length(top) + polyline_length(bottom));
  }
};

inline ControlPointSet init_control_points(const OrientedBox& box) {
  const auto c = box.corners();
  ControlPointSet cps;
  for (std::size_t i = 0; i < kControlPairs; ++i) {
    const double t = static_cast<double>(i) / (kControlPairs - 1);
    cps.top[i] = c[0] + (c[1] - c[0]) * t;
    cps.bottom[i] = c[3] + (c[2] - c[3]) * t;
  }
  return cps;
}

/// Polygons with exactly 10 stations are used as they are; any other
/// station count is resampled uniformly by arc length.
inline ControlPointSet init_control_points(const TextPolygon& poly) {
  poly.validate();
  ControlPointSet cps;
  if (poly.size() == kControlPairs) {
    std::copy(poly.top.begin(), poly.top.end(), cps.top.begin());
    std::copy(poly.bottom.begin(), poly.bottom.end(), cps.bottom.begin());
    return cps;
  }
  const auto top = resample_polyline(poly.top, kControlPairs);
  const auto bottom = resample_polyline(poly.bottom, kControlPairs);
  std::copy(top.begin(), top.end(), cps.top.begin());
  std::copy(bottom.begin(), bottom.end(), cps.bottom.begin());
  return cps;
}

// ---------------------------------------------------------------------------
// Iterative refinement

struct RectifyConfig {
  int iterations = 3;
  double regularization = 1e-6;
  int canonical_height = 64;
  int min_width = 64;
  int max_width = 512;
  /// Fraction of the canonical height given to the text band; the rest is
  /// split evenly above and below it.
  double band_fraction = 0.5;
  /// Columns whose region mass falls below this keep their previous points.
  double min_column_mass = 1e-6;
  /// Columns lighter than this fraction of the heaviest one lie beyond the
  /// ends of the text.
  double end_fraction = 0.01;

  void validate() const {
    if (iterations < 1) throw InvalidArgument("RectifyConfig: iterations must be >= 1");
    if (!(regularization >= 0.0)) throw InvalidArgument("RectifyConfig: regularization must be >= 0");
    if (canonical_height < 8 || min_width < 8 || max_width < min_width) {
      throw InvalidArgument("RectifyConfig: invalid canonical grid");
    }
    if (!(band_fraction > 0.0 && band_fraction <= 1.0)) {
      throw InvalidArgument("RectifyConfig: band_fraction must lie in (0, 1]");
    }
  }
};

/// Rectified grid layout for one control point set.
struct CanonicalGrid {
  int width = 0;
  int height = 0;
  double band_top = 0.0;
  double band_bottom = 0.0;

  double band_height() const { return band_bottom - band_top; }
  double center_y() const { return 0.5 * (band_top + band_bottom); }
  double station_x(std::size_t i) const {
    return (width - 1) * static_cast<double>(i) / (kControlPairs - 1);
  }
  ControlPointSet lattice() const {
    ControlPointSet l;
    for (std::size_t i = 0; i < kControlPairs; ++i) {
      l.top[i] = {station_x(i), band_top};
      l.bottom[i] = {station_x(i), band_bottom};
    }
    return l;
  }
};

inline CanonicalGrid canonical_grid(const ControlPointSet& cps, const RectifyConfig& cfg = {}) {
  const double h = cfg.canonical_height;
  const double height = std::max(cps.mean_height(), 1e-9);
  const double w = std::round(h * cps.mean_length() / height);
  CanonicalGrid g;
  g.height = cfg.canonical_height;
  g.width = static_cast<int>(std::clamp(w, double(cfg.min_width), double(cfg.max_width)));
  const double margin = 0.5 * (1.0 - cfg.band_fraction) * (h - 1.0);
  g.band_top = margin;
  g.band_bottom = h - 1.0 - margin;
  return g;
}

/// Ratio between the distance from the center to an edge of a character
/// and the standard deviation of its region profile across the text. The
/// stamp is a Gaussian with sigma = 1/4 truncated at the character edges
/// (+-2 sigma), whose standard deviation is sigma * sqrt(1 - 2a phi(a) /
/// (2 Phi(a) - 1)) with a = 2.
inline double half_extent_per_std() {
  const double a = 0.5 / kGaussianSigma;
  const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
  const double mass = std::erf(a / std::numbers::sqrt2);  // 2 Phi(a) - 1
  return a / std::sqrt(1.0 - 2.0 * a * phi / mass);
}

/// Region-weighted mean row and standard deviation of a band of columns.
struct ColumnProfile {
  double mass = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

template <class T>
ColumnProfile column_profile(const Map<T>& map, int x_lo, int x_hi) {
  ColumnProfile p;
  x_lo = std::max(x_lo, 0);
  x_hi = std::min(x_hi, map.width() - 1);
  double sy = 0.0, syy = 0.0;
  for (int y = 0; y < map.height(); ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      const double w = std::max(0.0, static_cast<double>(map(x, y)));
      p.mass += w;
      sy += w * y;
      syy += w * y * y;
    }
  }
  if (p.mass > 0.0) {
    p.mean = sy / p.mass;
    p.stddev = std::sqrt(std::max(0.0, syy / p.mass - p.mean * p.mean));
  }
  return p;
}

struct RectifyResult {
  DetectorMaps rectified;                ///< maps warped with the final points
  ControlPointSet control_points;        ///< final points, image coordinates
  std::vector<ControlPointSet> history;  ///< initial points, then one set per iteration
  CanonicalGrid grid;                    ///< layout of `rectified`
};

/// Canonical-grid -> image transform for a control point set.
inline TpsTransform canonical_transform(const ControlPointSet& cps, const CanonicalGrid& grid,
                                        double reg) {
  const auto src = grid.lattice().flattened();
  const auto dst = cps.flattened();
  return tps_fit(src, dst, reg);
}

inline DetectorMaps warp_maps(const DetectorMaps& maps, const TpsTransform& t,
                              const CanonicalGrid& g) {
  return DetectorMaps{tps_warp(maps.region, t, g.width, g.height),
                      tps_warp(maps.link, t, g.width, g.height),
                      tps_warp(maps.sin, t, g.width, g.height),
                      tps_warp(maps.cos, t, g.width, g.height)};
}

namespace detail {

// Column range [first, last] whose mass is at least `fraction` of the
// heaviest column, or nullopt for an empty map.
template <class T>
std::optional<std::pair<int, int>> occupied_columns(const Map<T>& map, double fraction) {
  std::vector<double> mass(static_cast<std::size_t>(map.width()), 0.0);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) mass[x] += std::max(0.0, static_cast<double>(map(x, y)));
  }
  const double heaviest = *std::max_element(mass.begin(), mass.end());
  if (!(heaviest > 0.0)) return std::nullopt;
  int first = 0, last = map.width() - 1;
  while (mass[first] < fraction * heaviest) ++first;
  while (mass[last] < fraction * heaviest) --last;
  return std::pair{first, last};
}

// Centerline stations with their band heights, resampled evenly by arc
// length; pairs are rebuilt perpendicular to the resampled centerline.
inline ControlPointSet pairs_along(const std::vector<Point>& centers, const std::vector<double>& heights) {
  std::vector<double> s(centers.size(), 0.0);
  for (std::size_t i = 1; i < centers.size(); ++i) s[i] = s[i - 1] + distance(centers[i - 1], centers[i]);
  const double total = s.back();
  std::array<Point, kControlPairs> c{};
  std::array<double, kControlPairs> h{};
  std::size_t seg = 0;
  for (std::size_t i = 0; i < kControlPairs; ++i) {
    const double target = total * static_cast<double>(i) / (kControlPairs - 1);
    while (seg + 2 < centers.size() && s[seg + 1] < target) ++seg;
    const double len = s[seg + 1] - s[seg];
    const double f = len > 0.0 ? std::clamp((target - s[seg]) / len, 0.0, 1.0) : 0.0;
    c[i] = centers[seg] + (centers[seg + 1] - centers[seg]) * f;
    h[i] = heights[seg] + (heights[seg + 1] - heights[seg]) * f;
  }
  ControlPointSet out;
  for (std::size_t i = 0; i < kControlPairs; ++i) {
    const Point a = c[i == 0 ? 0 : i - 1];
    const Point b = c[i + 1 == kControlPairs ? i : i + 1];
    const Point d = (b - a) / std::max(distance(a, b), 1e-12);
    const Point up{d.y, -d.x};
    out.top[i] = c[i] + up * (0.5 * h[i]);
    out.bottom[i] = c[i] - up * (0.5 * h[i]);
  }
  return out;
}

}  // namespace detail

/// One refinement step. The region map is warped onto the canonical grid;
/// each station column band gives a centerline point (weighted centroid)
/// and a band height (weighted spread); the ends of the centerline are
/// moved to the first and last occupied columns. Back in the image, the
/// centerline is resampled evenly and each pair is set perpendicular to it.
inline ControlPointSet refine_control_points(const ScoreMap& region, const ControlPointSet& cps,
                                             const RectifyConfig& cfg = {}) {
  const CanonicalGrid grid = canonical_grid(cps, cfg);
  const TpsTransform t = canonical_transform(cps, grid, cfg.regularization);
  const ScoreMap warped = tps_warp(region, t, grid.width, grid.height);
  const auto occupied = detail::occupied_columns(warped, cfg.end_fraction);
  if (!occupied) throw EmptyRegion("iterative_rectify: no region mass under the control points");
  const double half_band = 0.5 * (grid.station_x(1) - grid.station_x(0));
  const double k = half_extent_per_std();

  struct Station {
    double x;
    double mean;
    double half;
  };
  std::vector<Station> stations;
  for (std::size_t i = 0; i < kControlPairs; ++i) {
    const double x = grid.station_x(i);
    const auto lo = static_cast<int>(std::ceil(x - half_band));
    const auto hi = static_cast<int>(std::floor(x + half_band));
    const ColumnProfile p = column_profile(warped, lo, hi);
    if (p.mass < cfg.min_column_mass) {
      // Keep the previous pair for this station.
      stations.push_back({x, grid.center_y(), 0.5 * grid.band_height()});
    } else {
      stations.push_back({x, p.mean, k * p.stddev});
    }
  }
  // Stations whose band pokes out of the occupied span only see part of a
  // character; they are replaced by the span ends.
  const double x0 = occupied->first - 0.5, x1 = occupied->second + 0.5;
  std::vector<Station> kept;
  for (const Station& s : stations) {
    if (s.x - half_band >= x0 && s.x + half_band <= x1) kept.push_back(s);
  }
  if (kept.empty()) {
    kept.push_back({0.5 * (x0 + x1), grid.center_y(), 0.5 * grid.band_height()});
  }

  std::vector<Point> centers;
  std::vector<double> heights;
  for (const Station& s : kept) {
    centers.push_back(t(Point{s.x, s.mean}));
    heights.push_back(distance(t(Point{s.x, s.mean - s.half}), t(Point{s.x, s.mean + s.half})));
  }
  // The ends continue the image-space centerline straight out to the span
  // ends; reading the ends off the canonical grid would lock in its tilt.
  const auto extend = [&](std::size_t from, std::size_t toward, double canonical_gap) {
    if (kept.size() < 2) return t(Point{from == 0 ? x0 : x1, kept[from].mean});
    const double scale = distance(centers[from], centers[toward]) / std::abs(kept[from].x - kept[toward].x);
    const Point d = (centers[from] - centers[toward]) / std::max(distance(centers[from], centers[toward]), 1e-12);
    return centers[from] + d * (canonical_gap * scale);
  };
  const std::size_t last = kept.size() - 1;
  const Point head = extend(0, std::min<std::size_t>(1, last), kept.front().x - x0);
  const Point tail = extend(last, last == 0 ? 0 : last - 1, x1 - kept.back().x);
  centers.insert(centers.begin(), head);
  heights.insert(heights.begin(), heights.front());
  centers.push_back(tail);
  heights.push_back(heights.back());
  return detail::pairs_along(centers, heights);
}

inline RectifyResult iterative_rectify(const DetectorMaps& maps, const ControlPointSet& initial,
                                       const RectifyConfig& cfg = {}) {
  cfg.validate();
  if (!maps.consistent()) throw InvalidArgument("iterative_rectify: channel size mismatch");
  RectifyResult out;
  out.history.push_back(initial);
  ControlPointSet cps = initial;
  for (int it = 0; it < cfg.iterations; ++it) {
    cps = refine_control_points(maps.region, cps, cfg);
    out.history.push_back(cps);
  }
  out.control_points = cps;
  out.grid = canonical_grid(cps, cfg);
  out.rectified = warp_maps(maps, canonical_transform(cps, out.grid, cfg.regularization), out.grid);
  return out;
}

inline RectifyResult iterative_rectify(const DetectorMaps& maps, const ControlPointSet& initial, int iterations) {
  RectifyConfig cfg;
  cfg.iterations = iterations;
  return iterative_rectify(maps, initial, cfg);
}

/// Largest offset of the region-weighted centerline from the middle of the
/// text band in a rectified region map, as a fraction of the band height.
/// Columns carrying less than `min_fraction` of the heaviest column's mass
/// are ignored.
template <class T>
double centerline_deviation(const Map<T>& rectified_region, const CanonicalGrid& grid,
                            double min_fraction = 0.25) {
  std::vector<ColumnProfile> cols;
  double heaviest = 0.0;
  for (int x = 0; x < rectified_region.width(); ++x) {
    cols.push_back(column_profile(rectified_region, x, x));
    heaviest = std::max(heaviest, cols.back().mass);
  }
  if (!(heaviest > 0.0)) throw EmptyRegion("centerline_deviation: empty rectified map");
  double worst = 0.0;
  for (const ColumnProfile& c : cols) {
    if (c.mass < min_fraction * heaviest) continue;
    worst = std::max(worst, std::abs(c.mean - grid.center_y()));
  }
  return worst / grid.band_height();
}

// ---------------------------------------------------------------------------
// Polygon smoothing

/// Least-squares polynomial fit of the top and bottom point rows, each as
/// y(x) in the frame whose x axis runs from the first to the last pair
/// midpoint. Points are projected onto the fitted curves at their own x.
inline TextPolygon smooth_polygon(const TextPolygon& poly, int degree = 2) {
  poly.validate();
  if (degree < 1) throw InvalidArgument("smooth_polygon: degree must be >= 1");
  if (static_cast<std::size_t>(degree) >= poly.size()) {
    throw InvalidArgument("smooth_polygon: degree must be below the station count");
  }
  std::vector<Point> all(poly.top);
  all.insert(all.end(), poly.bottom.begin(), poly.bottom.end());
  const Point origin = centroid_of_vertices(all);
  const Point axis = midpoint(poly.top.back(), poly.bottom.back()) -
                     midpoint(poly.top.front(), poly.bottom.front());
  const double len = norm(axis);
  if (!(len > 0.0)) throw IllConditioned("smooth_polygon: first and last stations coincide");
  const Point u = axis / len;
  const Point v{-u.y, u.x};

  const auto fit_row = [&](const std::vector<Point>& row) {
    const auto n = static_cast<Eigen::Index>(row.size());
    Eigen::VectorXd xs(n), ys(n);
    double scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Point d = row[static_cast<std::size_t>(i)] - origin;
      xs(i) = dot(d, u);
      ys(i) = dot(d, v);
      scale = std::max(scale, std::abs(xs(i)));
    }
    if (!(scale > 0.0)) scale = 1.0;
    Eigen::MatrixXd vander(n, degree + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      double p = 1.0;
      for (int d = 0; d <= degree; ++d, p *= xs(i) / scale) vander(i, d) = p;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(vander);
    qr.setThreshold(1e-10);
    if (qr.rank() < degree + 1) {
      throw IllConditioned("smooth_polygon: rank-deficient Vandermonde system");
    }
    const Eigen::VectorXd coef = qr.solve(ys);
    const Eigen::VectorXd fitted = vander * coef;
    std::vector<Point> out;
    for (Eigen::Index i = 0; i < n; ++i) out.push_back(origin + u * xs(i) + v * fitted(i));
    return out;
  };
  return TextPolygon{fit_row(poly.top), fit_row(poly.bottom)};
}

inline TextPolygon smooth_polygon(const ControlPointSet& cps, int degree = 2) {
  return smooth_polygon(cps.polygon(), degree);
}

}  // namespace craft
