#pragma once

// Planar geometry used across the pipeline: quadrilaterals, oriented boxes,
// paired-control-point polygons, homographies, polygon clipping / IoU and
// minimum-area rectangles.
//
// Coordinates are image pixels with y pointing down. Pixel (i, j) has its
// center at (i, j) exactly. Every polygon is stored "clockwise on screen"
// (top-left, top-right, bottom-right, bottom-left for a quad), which is a
// positive shoelace area in these coordinates.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "craft/error.hpp"

namespace craft {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }
  friend constexpr Point operator*(double s, Point a) { return {a.x * s, a.y * s}; }
  friend constexpr Point operator/(Point a, double s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(Point a, Point b) = default;
};

constexpr double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(a - b); }
constexpr Point midpoint(Point a, Point b) { return {(a.x + b.x) * 0.5, (a.y + b.y) * 0.5}; }
inline bool is_finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Unit vector along the text reading direction for angle `theta`.
inline Point direction(double theta) { return {std::cos(theta), std::sin(theta)}; }
/// Unit vector pointing "up" relative to reading direction `theta`
/// (toward the top edge of the text; (0, -1) for horizontal text).
inline Point up_direction(double theta) { return {std::sin(theta), -std::cos(theta)}; }

using Polygon = std::vector<Point>;

/// Four corners: top-left, top-right, bottom-right, bottom-left.
struct Quad {
  std::array<Point, 4> corners{};

  Polygon polygon() const { return {corners.begin(), corners.end()}; }
};

/// Rotated rectangle. `width` runs along direction(theta), `height` along
/// the perpendicular.
struct OrientedBox {
  Point center;
  double width = 0.0;
  double height = 0.0;
  double theta = 0.0;

  std::array<Point, 4> corners() const {
    const Point u = direction(theta) * (width * 0.5);
    const Point v = up_direction(theta) * (height * 0.5);
    return {center - u + v, center + u + v, center + u - v, center - u - v};
  }
  Polygon polygon() const {
    const auto c = corners();
    return {c.begin(), c.end()};
  }
  double area() const { return width * height; }
};

/// Curved-text outline given as index-paired top and bottom control points.
struct TextPolygon {
  std::vector<Point> top;
  std::vector<Point> bottom;

  std::size_t size() const { return top.size(); }

  /// Closed outline: top left-to-right then bottom right-to-left.
  Polygon outline() const {
    Polygon out(top.begin(), top.end());
    out.insert(out.end(), bottom.rbegin(), bottom.rend());
    return out;
  }
  void validate() const {
    if (top.size() != bottom.size()) {
      throw InvalidArgument("TextPolygon: top and bottom point counts differ");
    }
    if (top.size() < 2) throw InvalidArgument("TextPolygon: need at least 2 stations");
  }
};

// ---------------------------------------------------------------------------
// Angles

/// Wraps an angle into (-pi, pi].
inline double wrap_pi(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

/// Wraps an angle into (-pi/2, pi/2] (angles of undirected lines).
inline double wrap_half_pi(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::remainder(a, pi);
  if (a <= -pi / 2) a += pi;
  if (a > pi / 2) a -= pi;
  return a;
}

/// Puts a box into canonical form: theta in (-pi/2, pi/2], width >= height.
/// A square keeps the representative angle closest to zero, i.e. in
/// (-pi/4, pi/4].
inline OrientedBox canonicalize(OrientedBox box) {
  constexpr double pi = std::numbers::pi;
  const double scale = std::max(box.width, box.height);
  const bool tie = std::abs(box.width - box.height) <= 1e-9 * scale;
  if (!tie && box.height > box.width) {
    std::swap(box.width, box.height);
    box.theta += pi / 2;
  }
  box.theta = wrap_half_pi(box.theta);
  if (tie) {
    if (box.theta > pi / 4) box.theta -= pi / 2;
    if (box.theta <= -pi / 4) box.theta += pi / 2;
  }
  return box;
}

// ---------------------------------------------------------------------------
// Polygon basics

/// Shoelace area; positive for screen-clockwise vertex order.
inline double signed_area(std::span<const Point> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * acc;
}

inline double area(std::span<const Point> poly) { return std::abs(signed_area(poly)); }

/// Vertex mean.
inline Point centroid_of_vertices(std::span<const Point> pts) {
  Point c;
  for (const Point& p : pts) c = c + p;
  return pts.empty() ? c : c / static_cast<double>(pts.size());
}

/// Center of a quad: intersection of its diagonals (the image of the unit
/// square's center under the corner homography). Falls back to the vertex
/// mean when the diagonals are parallel.
inline Point quad_center(const Quad& q) {
  const auto& c = q.corners;
  const Point d1 = c[2] - c[0];
  const Point d2 = c[3] - c[1];
  const double den = cross(d1, d2);
  if (std::abs(den) < 1e-12 * (dot(d1, d1) + dot(d2, d2))) {
    return centroid_of_vertices(c);
  }
  const double t = cross(c[1] - c[0], d2) / den;
  return c[0] + d1 * t;
}

/// Mean length of the two diagonals.
inline double quad_diagonal(const Quad& q) {
  const auto& c = q.corners;
  return 0.5 * (distance(c[0], c[2]) + distance(c[1], c[3]));
}

/// Reading-direction angle of a quad from its top and bottom edges.
inline double quad_angle(const Quad& q) {
  const auto& c = q.corners;
  const Point d = (c[1] - c[0]) + (c[2] - c[3]);
  return std::atan2(d.y, d.x);
}

/// Even-odd point-in-polygon test.
inline bool contains(std::span<const Point> poly, Point p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

/// Andrew's monotone chain. Collinear points are dropped. Output is
/// screen-clockwise (positive signed area).
inline Polygon convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  Polygon hull(2 * pts.size());
  std::size_t k = 0;
  // Keep left turns in math orientation; reversed at the end.
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const Point& p = pts[i];
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  if (signed_area(hull) < 0) std::reverse(hull.begin(), hull.end());
  return hull;
}

inline bool is_convex(std::span<const Point> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  int sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = cross(poly[(i + 1) % n] - poly[i], poly[(i + 2) % n] - poly[(i + 1) % n]);
    if (c == 0.0) continue;
    const int s = c > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return sign != 0;
}

/// Returns the polygon with positive signed area.
inline Polygon oriented_positive(std::span<const Point> poly) {
  Polygon out(poly.begin(), poly.end());
  if (signed_area(out) < 0) std::reverse(out.begin(), out.end());
  return out;
}

/// Sutherland-Hodgman clipping of `subject` by the convex polygon `clip`.
/// Both must have positive signed area.
inline Polygon clip_convex(std::span<const Point> subject, std::span<const Point> clip) {
  Polygon output(subject.begin(), subject.end());
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !output.empty(); ++e) {
    const Point a = clip[e];
    const Point b = clip[(e + 1) % m];
    const Point ab = b - a;
    const auto side = [&](Point p) { return cross(ab, p - a); };
    Polygon input = std::move(output);
    output.clear();
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Point cur = input[i];
      const Point prev = input[(i + input.size() - 1) % input.size()];
      const double sc = side(cur);
      const double sp = side(prev);
      if (sc >= 0) {
        if (sp < 0) output.push_back(prev + (cur - prev) * (sp / (sp - sc)));
        output.push_back(cur);
      } else if (sp >= 0) {
        output.push_back(prev + (cur - prev) * (sp / (sp - sc)));
      }
    }
  }
  return output;
}

using Triangle = std::array<Point, 3>;

/// Ear-clipping triangulation of a simple polygon.
inline std::vector<Triangle> triangulate(std::span<const Point> poly) {
  Polygon ring = oriented_positive(poly);
  std::vector<Triangle> tris;
  if (ring.size() < 3) return tris;
  const auto point_in_triangle = [](Point p, Point a, Point b, Point c) {
    return cross(b - a, p - a) >= 0 && cross(c - b, p - b) >= 0 && cross(a - c, p - c) >= 0;
  };
  while (ring.size() > 3) {
    const std::size_t n = ring.size();
    std::size_t ear = n;
    for (std::size_t i = 0; i < n && ear == n; ++i) {
      const Point a = ring[(i + n - 1) % n];
      const Point b = ring[i];
      const Point c = ring[(i + 1) % n];
      if (cross(b - a, c - b) <= 0) continue;
      bool blocked = false;
      for (std::size_t j = 0; j < n && !blocked; ++j) {
        if (j == i || j == (i + 1) % n || j == (i + n - 1) % n) continue;
        const Point p = ring[j];
        if (p == a || p == b || p == c) continue;
        blocked = point_in_triangle(p, a, b, c);
      }
      if (!blocked) ear = i;
    }
    if (ear == n) {
      // Only reflex or collinear vertices left: clip the flattest vertex.
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        const double c = cross(ring[i] - ring[(i + n - 1) % n], ring[(i + 1) % n] - ring[i]);
        if (c > best) best = c, ear = i;
      }
    }
    const Triangle t{ring[(ear + n - 1) % n], ring[ear], ring[(ear + 1) % n]};
    if (signed_area(t) > 0) tris.push_back(t);
    ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(ear));
  }
  if (signed_area(ring) > 0) tris.push_back({ring[0], ring[1], ring[2]});
  return tris;
}

/// Exact intersection area of two simple polygons.
inline double intersection_area(std::span<const Point> a, std::span<const Point> b) {
  const Polygon pa = oriented_positive(a);
  const Polygon pb = oriented_positive(b);
  if (is_convex(pb)) {
    if (is_convex(pa)) return area(clip_convex(pa, pb));
    double acc = 0.0;
    for (const Triangle& t : triangulate(pa)) acc += area(clip_convex(t, pb));
    return acc;
  }
  if (is_convex(pa)) return intersection_area(pb, pa);
  const auto ta = triangulate(pa);
  const auto tb = triangulate(pb);
  double acc = 0.0;
  for (const Triangle& x : ta) {
    for (const Triangle& y : tb) acc += area(clip_convex(x, y));
  }
  return acc;
}

/// Intersection over union of two simple polygons, in [0, 1].
inline double polygon_iou(std::span<const Point> a, std::span<const Point> b) {
  const double area_a = area(a);
  const double area_b = area(b);
  if (!(area_a > 0.0) || !(area_b > 0.0)) {
    throw DegeneratePolygon("polygon_iou: polygon with zero area");
  }
  const double inter = std::min(intersection_area(a, b), std::min(area_a, area_b));
  const double uni = area_a + area_b - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Polylines

inline double polyline_length(std::span<const Point> line) {
  double len = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) len += distance(line[i - 1], line[i]);
  return len;
}

/// `count` points spaced uniformly by arc length along `line`.
inline std::vector<Point> resample_polyline(std::span<const Point> line, std::size_t count) {
  std::vector<Point> out;
  if (line.empty() || count == 0) return out;
  if (count == 1 || line.size() == 1) return std::vector<Point>(count, line.front());
  std::vector<double> cum(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) cum[i] = cum[i - 1] + distance(line[i - 1], line[i]);
  const double total = cum.back();
  std::size_t seg = 1;
  for (std::size_t k = 0; k < count; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(count - 1);
    while (seg + 1 < line.size() && cum[seg] < s) ++seg;
    const double span = cum[seg] - cum[seg - 1];
    const double t = span > 0.0 ? std::clamp((s - cum[seg - 1]) / span, 0.0, 1.0) : 0.0;
    out.push_back(line[seg - 1] + (line[seg] - line[seg - 1]) * t);
  }
  out.front() = line.front();
  out.back() = line.back();
  return out;
}

// ---------------------------------------------------------------------------
// Minimum-area rectangle

/// Smallest-area rotated rectangle enclosing `points` (rotating calipers over
/// the convex hull edges). Result is canonicalized.
inline OrientedBox min_area_rect(std::span<const Point> points) {
  if (points.size() < 3) throw DegenerateInput("min_area_rect: need at least 3 points");
  double min_x = points[0].x, max_x = min_x, min_y = points[0].y, max_y = min_y;
  for (const Point& p : points) {
    if (!is_finite(p)) throw DegenerateInput("min_area_rect: non-finite point");
    min_x = std::min(min_x, p.x), max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y), max_y = std::max(max_y, p.y);
  }
  const double diag2 = (max_x - min_x) * (max_x - min_x) + (max_y - min_y) * (max_y - min_y);
  const Polygon hull = convex_hull({points.begin(), points.end()});
  if (hull.size() < 3 || area(hull) < 1e-9 * diag2) {
    throw DegenerateInput("min_area_rect: points are collinear");
  }

  OrientedBox best;
  double best_area = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point edge = hull[(i + 1) % hull.size()] - hull[i];
    const double len = norm(edge);
    if (len == 0.0) continue;
    const Point u = edge / len;
    const Point v{-u.y, u.x};
    double lo_u = std::numeric_limits<double>::infinity(), hi_u = -lo_u;
    double lo_v = lo_u, hi_v = -lo_u;
    for (const Point& p : hull) {
      const double pu = dot(p, u);
      const double pv = dot(p, v);
      lo_u = std::min(lo_u, pu), hi_u = std::max(hi_u, pu);
      lo_v = std::min(lo_v, pv), hi_v = std::max(hi_v, pv);
    }
    const double a = (hi_u - lo_u) * (hi_v - lo_v);
    if (a < best_area) {
      best_area = a;
      best.center = u * (0.5 * (lo_u + hi_u)) + v * (0.5 * (lo_v + hi_v));
      best.width = hi_u - lo_u;
      best.height = hi_v - lo_v;
      best.theta = std::atan2(u.y, u.x);
    }
  }
  return canonicalize(best);
}

/// Tightest box with a prescribed orientation `theta` enclosing `points`.
inline OrientedBox enclosing_box(std::span<const Point> points, double theta) {
  const Point u = direction(theta);
  const Point v = up_direction(theta);
  double lo_u = std::numeric_limits<double>::infinity(), hi_u = -lo_u;
  double lo_v = lo_u, hi_v = -lo_u;
  for (const Point& p : points) {
    lo_u = std::min(lo_u, dot(p, u)), hi_u = std::max(hi_u, dot(p, u));
    lo_v = std::min(lo_v, dot(p, v)), hi_v = std::max(hi_v, dot(p, v));
  }
  OrientedBox box;
  box.center = u * (0.5 * (lo_u + hi_u)) + v * (0.5 * (lo_v + hi_v));
  box.width = hi_u - lo_u;
  box.height = hi_v - lo_v;
  box.theta = theta;
  return box;
}

// ---------------------------------------------------------------------------
// Homography

class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}

  static Homography from_matrix(const Eigen::Matrix3d& m) {
    if (!(std::abs(m.determinant()) > 1e-12)) {
      throw SingularSystem("Homography: matrix is not invertible");
    }
    Homography h;
    h.m_ = m;
    return h;
  }

  const Eigen::Matrix3d& matrix() const { return m_; }

  Point apply(Point p) const {
    const double w = m_(2, 0) * p.x + m_(2, 1) * p.y + m_(2, 2);
    return {(m_(0, 0) * p.x + m_(0, 1) * p.y + m_(0, 2)) / w,
            (m_(1, 0) * p.x + m_(1, 1) * p.y + m_(1, 2)) / w};
  }
  Point operator()(Point p) const { return apply(p); }

  Homography inverse() const {
    Eigen::Matrix3d inv = m_.inverse();
    if (inv(2, 2) != 0.0) inv /= inv(2, 2);
    return from_matrix(inv);
  }

  friend Homography operator*(const Homography& a, const Homography& b) {
    Eigen::Matrix3d m = a.m_ * b.m_;
    if (m(2, 2) != 0.0) m /= m(2, 2);
    return from_matrix(m);
  }

 private:
  Eigen::Matrix3d m_;
};

namespace detail {

// Similarity transform sending the corners to zero mean and unit RMS radius.
inline Eigen::Matrix3d normalizing_transform(const std::array<Point, 4>& pts) {
  const Point c = centroid_of_vertices(pts);
  double rms = 0.0;
  for (const Point& p : pts) rms += dot(p - c, p - c);
  rms = std::sqrt(rms / 4.0);
  const double s = rms > 0.0 ? 1.0 / rms : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * c.x, 0, s, -s * c.y, 0, 0, 1;
  return t;
}

}  // namespace detail

/// Projective map taking the corners of `src` onto the corners of `dst`,
/// scaled so the bottom-right entry is 1.
inline Homography quad_homography(const Quad& src, const Quad& dst) {
  const Eigen::Matrix3d ts = detail::normalizing_transform(src.corners);
  const Eigen::Matrix3d td = detail::normalizing_transform(dst.corners);
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d s = ts * Eigen::Vector3d(src.corners[i].x, src.corners[i].y, 1.0);
    const Eigen::Vector3d d = td * Eigen::Vector3d(dst.corners[i].x, dst.corners[i].y, 1.0);
    const double x = s.x(), y = s.y(), u = d.x(), v = d.y();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -x * u, -y * u;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -x * v, -y * v;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() < 8) throw SingularSystem("quad_homography: rank-deficient corner system");
  const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  Eigen::Matrix3d m = td.inverse() * hn * ts;
  if (!(std::abs(m(2, 2)) > 1e-300)) {
    throw SingularSystem("quad_homography: map sends the origin to infinity");
  }
  m /= m(2, 2);
  return Homography::from_matrix(m);
}

/// The unit square as a quad (TL, TR, BR, BL).
inline Quad unit_square() { return Quad{{Point{0, 0}, Point{1, 0}, Point{1, 1}, Point{0, 1}}}; }

}  // namespace craft
