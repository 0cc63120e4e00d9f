#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "craft/geometry.hpp"
#include "oracles.hpp"

using namespace craft;
constexpr double kPi = std::numbers::pi;

namespace {

Polygon square(double x, double y, double s = 1.0) { return {{x, y}, {x + s, y}, {x + s, y + s}, {x, y + s}}; }

}  // namespace

TEST(Canonicalize, SwapsAndWraps) {
  const OrientedBox b = canonicalize({{0, 0}, 2, 5, 0.3});
  EXPECT_DOUBLE_EQ(b.width, 5);
  EXPECT_DOUBLE_EQ(b.height, 2);
  EXPECT_NEAR(b.theta, 0.3 + kPi / 2 - kPi, 1e-12);
  EXPECT_NEAR(canonicalize({{0, 0}, 5, 2, kPi}).theta, 0.0, 1e-12);
  EXPECT_NEAR(canonicalize({{0, 0}, 5, 2, -kPi / 2}).theta, kPi / 2, 1e-12);
}

TEST(Canonicalize, SquareTieKeepsAngleNearZero) {
  for (double t : {0.1, 0.9, 1.4, -1.2, 2.8}) {
    const OrientedBox b = canonicalize({{0, 0}, 3, 3, t});
    EXPECT_GT(b.theta, -kPi / 4 - 1e-12);
    EXPECT_LE(b.theta, kPi / 4 + 1e-12);
  }
}

TEST(OrientedBox, CornersScreenClockwise) {
  const OrientedBox b{{10, 10}, 4, 2, 0.0};
  const auto c = b.corners();
  EXPECT_EQ(c[0], (Point{8, 9}));
  EXPECT_EQ(c[2], (Point{12, 11}));
  EXPECT_NEAR(signed_area(b.polygon()), 8.0, 1e-12);
}

TEST(MinAreaRect, UnitSquare) {
  const std::vector<Point> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const OrientedBox b = min_area_rect(pts);
  EXPECT_NEAR(b.center.x, 0.5, 1e-12);
  EXPECT_NEAR(b.center.y, 0.5, 1e-12);
  EXPECT_NEAR(b.width, 1, 1e-12);
  EXPECT_NEAR(b.height, 1, 1e-12);
  EXPECT_NEAR(b.theta, 0, 1e-12);
}

TEST(MinAreaRect, RotatedSquare) {
  const double a = kPi / 6;
  std::vector<Point> pts;
  for (Point p : square(0, 0)) pts.push_back({p.x * std::cos(a) - p.y * std::sin(a), p.x * std::sin(a) + p.y * std::cos(a)});
  const OrientedBox b = min_area_rect(pts);
  EXPECT_NEAR(b.width, 1, 1e-9);
  EXPECT_NEAR(b.height, 1, 1e-9);
  EXPECT_NEAR(b.theta, kPi / 6, 1e-9);
  EXPECT_NEAR(b.area(), oracle::brute_min_rect_area(pts), 0.005 * b.area());
}

TEST(MinAreaRect, Degenerate) {
  EXPECT_THROW(min_area_rect(std::vector<Point>{{0, 0}, {1, 1}}), DegenerateInput);
  EXPECT_THROW(min_area_rect(std::vector<Point>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}), DegenerateInput);
  EXPECT_THROW(min_area_rect(std::vector<Point>{{0, 0}, {1, 1}, {2, std::nan("")}}), DegenerateInput);
}

TEST(MinAreaRect, EnclosesAndBeatsSweep) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 5);
  for (int t = 0; t < 100; ++t) {
    std::vector<Point> pts;
    for (int i = 0; i < 12; ++i) pts.push_back({n(rng) * 2, n(rng)});
    const OrientedBox b = min_area_rect(pts);
    EXPECT_LE(b.area(), oracle::brute_min_rect_area(pts) * 1.005);
    const Polygon poly = b.polygon();
    for (Point p : pts) {
      // Inside or on the boundary (grow the box slightly).
      const OrientedBox g{b.center, b.width + 1e-6, b.height + 1e-6, b.theta};
      EXPECT_TRUE(contains(g.polygon(), p));
    }
    EXPECT_GT(b.theta, -kPi / 2);
    EXPECT_LE(b.theta, kPi / 2);
    EXPECT_GE(b.width, b.height);
  }
}

TEST(PolygonIou, Basics) {
  EXPECT_DOUBLE_EQ(polygon_iou(square(0, 0), square(0, 0)), 1.0);
  EXPECT_DOUBLE_EQ(polygon_iou(square(0, 0), square(5, 5)), 0.0);
  EXPECT_NEAR(polygon_iou(square(0, 0), square(0.5, 0)), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(oracle::raster_iou(square(0, 0), square(0.5, 0), 512), 1.0 / 3.0, 0.01);
}

TEST(PolygonIou, WindingIndependent) {
  Polygon a = square(0, 0, 2);
  Polygon b = square(1, 0.5, 2);
  const double iou = polygon_iou(a, b);
  std::reverse(b.begin(), b.end());
  EXPECT_NEAR(polygon_iou(a, b), iou, 1e-12);
}

TEST(PolygonIou, DegenerateThrows) {
  const Polygon flat{{0, 0}, {1, 0}, {2, 0}};
  EXPECT_THROW(polygon_iou(flat, square(0, 0)), DegeneratePolygon);
}

TEST(PolygonIou, SymmetricAndMatchesRaster) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    const Polygon a = oracle::random_quad(rng).polygon();
    const Polygon b = oracle::random_quad(rng).polygon();
    const double ab = polygon_iou(a, b);
    EXPECT_NEAR(ab, polygon_iou(b, a), 1e-12);
    EXPECT_NEAR(ab, oracle::raster_iou(a, b, 512), 0.01);
    EXPECT_NEAR(polygon_iou(a, a), 1.0, 1e-12);
  }
}

TEST(PolygonIou, NonConvex) {
  // L shape vs a square covering its corner.
  const Polygon l{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  const Polygon s = square(0.5, 0.5, 1.0);
  EXPECT_NEAR(polygon_iou(l, s), oracle::raster_iou(l, s, 1024), 0.01);
  EXPECT_NEAR(intersection_area(l, s), 0.75, 1e-12);
}

TEST(PolygonIou, DecreasesWithTranslation) {
  const Polygon a = square(0, 0, 4);
  double prev = 1.0;
  for (double dx = 0.25; dx < 5; dx += 0.25) {
    Polygon b = a;
    for (Point& p : b) p.x += dx;
    const double iou = polygon_iou(a, b);
    EXPECT_LE(iou, prev + 1e-12);
    prev = iou;
  }
  EXPECT_EQ(prev, 0.0);
}

TEST(QuadHomography, IdentityAndTranslation) {
  const Homography h = quad_homography(unit_square(), unit_square());
  EXPECT_TRUE(h.matrix().isApprox(Eigen::Matrix3d::Identity(), 1e-12));
  Quad moved = unit_square();
  for (Point& p : moved.corners) p = p + Point{5, 7};
  const Eigen::Matrix3d m = quad_homography(unit_square(), moved).matrix();
  Eigen::Matrix3d expected;
  expected << 1, 0, 5, 0, 1, 7, 0, 0, 1;
  EXPECT_TRUE(m.isApprox(expected, 1e-12));
}

TEST(QuadHomography, RandomCornersAndInverse) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const Quad a = oracle::random_quad(rng, 50), b = oracle::random_quad(rng, 50);
    const Homography h = quad_homography(a, b);
    EXPECT_DOUBLE_EQ(h.matrix()(2, 2), 1.0);
    for (int k = 0; k < 4; ++k) EXPECT_LT(distance(h(a.corners[k]), b.corners[k]), 1e-9);
    const Homography back = quad_homography(b, a);
    for (int k = 0; k < 4; ++k) EXPECT_LT(distance(back(h(a.corners[k])), a.corners[k]), 1e-6);
  }
}

TEST(QuadHomography, DegenerateThrows) {
  const Quad collapsed{{Point{0, 0}, Point{0, 0}, Point{0, 0}, Point{1, 1}}};
  EXPECT_THROW(quad_homography(collapsed, unit_square()), SingularSystem);
}

TEST(Quad, CenterDiagonalAngle) {
  const Quad q{{Point{0, 0}, Point{4, 0}, Point{4, 2}, Point{0, 2}}};
  EXPECT_EQ(quad_center(q), (Point{2, 1}));
  EXPECT_NEAR(quad_diagonal(q), std::sqrt(20.0), 1e-12);
  EXPECT_NEAR(quad_angle(q), 0.0, 1e-12);
}

TEST(Polyline, Resample) {
  const std::vector<Point> line{{0, 0}, {3, 0}, {3, 4}};
  EXPECT_DOUBLE_EQ(polyline_length(line), 7.0);
  const auto r = resample_polyline(line, 8);
  const auto o = oracle::arc_length_points(line, 8);
  ASSERT_EQ(r.size(), o.size());
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_LT(distance(r[i], o[i]), 1e-12);
}

TEST(ConvexHull, PositiveWinding) {
  const Polygon h = convex_hull({{0, 0}, {2, 0}, {1, 1}, {2, 2}, {0, 2}, {1, 0.5}});
  EXPECT_EQ(h.size(), 4u);
  EXPECT_NEAR(signed_area(h), 4.0, 1e-12);
}
