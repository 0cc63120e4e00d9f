#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "craft/postproc.hpp"
#include "craft/synth.hpp"
#include "oracles.hpp"

using namespace craft;
constexpr double kPi = std::numbers::pi;

namespace {

BinaryMap random_binary(std::mt19937_64& rng, int w, int h, double p) {
  std::bernoulli_distribution b(p);
  BinaryMap m(w, h);
  for (auto& v : m.values()) v = b(rng);
  return m;
}

WordAnnotation straight_word(Point start, double theta, int n, double size = 20.0, double pitch = 24.0) {
  WordAnnotation w;
  for (int i = 0; i < n; ++i) {
    const Point c = start + direction(theta) * (i * pitch);
    w.chars.push_back(CharBox{char_quad(c, theta, size, size), theta});
    w.transcription.push_back('x');
  }
  w.polygon = word_polygon(w.chars);
  return w;
}

Polygon word_box(const WordAnnotation& w) {
  std::vector<Point> pts;
  for (const CharBox& c : w.chars) pts.insert(pts.end(), c.quad.corners.begin(), c.quad.corners.end());
  return min_area_rect(pts).polygon();
}

}  // namespace

TEST(Binarize, ThresholdRule) {
  ScoreMap m(3, 1);
  m[0] = 0.39f;
  m[1] = 0.4f;
  m[2] = 0.9f;
  const BinaryMap b = binarize(m, 0.4f);
  EXPECT_EQ(b[0], 0);
  EXPECT_EQ(b[1], 1);
  EXPECT_EQ(b[2], 1);
  EXPECT_EQ(binarize(ScoreMap(4, 4), 0.5), BinaryMap(4, 4));
  EXPECT_THROW(binarize(m, 1.0), InvalidArgument);
  EXPECT_THROW(binarize(m, 0.0), InvalidArgument);
}

TEST(Binarize, RandomAgreesWithScan) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0, 1);
  ScoreMap m(33, 17);
  for (float& v : m.values()) v = u(rng);
  const BinaryMap b = binarize(m, 0.37);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(b[i] != 0, m[i] >= 0.37);
}

TEST(ConnectedComponents, Basics) {
  EXPECT_TRUE(connected_components(BinaryMap(5, 5)).empty());
  BinaryMap diag(3, 3);
  diag(0, 0) = diag(1, 1) = 1;
  EXPECT_EQ(connected_components(diag).size(), 1u);
  BinaryMap two(5, 1);
  two[0] = two[4] = 1;
  const auto blobs = connected_components(two);
  ASSERT_EQ(blobs.size(), 2u);
  EXPECT_EQ(blobs[0].pixels.front(), (PixelCoord{0, 0}));
  EXPECT_EQ(blobs[1].bounds, (PixelRect{4, 0, 4, 0}));
}

TEST(ConnectedComponents, FloodFillOracle) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    const BinaryMap m = random_binary(rng, 64, 64, 0.45);
    const Components c = label_components(m);
    const std::vector<int> ref = oracle::flood_fill_labels(m);
    for (std::size_t i = 0; i < m.size(); ++i) ASSERT_EQ(c.labels[i], ref[i]);
  }
}

TEST(EstimateOrientation, UniformEncodings) {
  Blob blob;
  for (int x = 0; x < 4; ++x) blob.pixels.push_back({x, 0});
  ScoreMap region(4, 1, 1.0f), s(4, 1, 1.0f), c(4, 1, 0.5f);
  EXPECT_NEAR(estimate_orientation(region, s, c, blob), kPi / 2, 1e-12);
  const float e = static_cast<float>((std::sqrt(2.0) / 2 + 1) / 2);
  EXPECT_NEAR(estimate_orientation(region, ScoreMap(4, 1, e), ScoreMap(4, 1, e), blob), kPi / 4, 1e-6);
  EXPECT_THROW(estimate_orientation(ScoreMap(4, 1), s, c, blob), OrientationUndefined);
}

TEST(EstimateOrientation, RecoversAnglesOnFiveDegreeGrid) {
  Blob blob;
  for (int x = 0; x < 3; ++x) blob.pixels.push_back({x, 0});
  for (int k = -17; k <= 18; ++k) {
    const double theta = k * 5.0 * kPi / 180.0;
    const auto enc = encode_orientation(theta);
    const double got = estimate_orientation(Map<double>(3, 1, 0.8), Map<double>(3, 1, enc.sin),
                                            Map<double>(3, 1, enc.cos), blob);
    EXPECT_NEAR(got, theta, 1e-6) << k;
  }
}

TEST(ExtractBoxes, AllZeroMaps) {
  const DetectorMaps maps{ScoreMap(16, 16), ScoreMap(16, 16), ScoreMap(16, 16, 0.5f), ScoreMap(16, 16, 0.5f)};
  EXPECT_TRUE(extract_boxes(maps).empty());
}

TEST(ExtractBoxes, HorizontalWordRoundTrip) {
  const std::vector<WordAnnotation> words{straight_word({30, 40}, 0.0, 5)};
  const DetectorMaps maps = render_detector_maps(words, {180, 80});
  const auto boxes = extract_boxes(maps);
  ASSERT_EQ(boxes.size(), 1u);
  EXPECT_GE(polygon_iou(boxes[0].polygon(), word_region(words[0])), 0.8);
  EXPECT_NEAR(boxes[0].theta, 0.0, 1e-6);
}

TEST(ExtractBoxes, TwoSeparatedRotatedWords) {
  const std::vector<WordAnnotation> words{straight_word({30, 40}, 0.3, 4), straight_word({60, 150}, -0.5, 5)};
  const DetectorMaps maps = render_detector_maps(words, {220, 220});
  const auto boxes = extract_boxes(maps);
  ASSERT_EQ(boxes.size(), 2u);
  for (const WordAnnotation& w : words) {
    double best = 0;
    for (const OrientedBox& b : boxes) best = std::max(best, polygon_iou(b.polygon(), word_box(w)));
    EXPECT_GE(best, 0.8);
  }
}

TEST(ExtractBoxes, BoxesEncloseBlobs) {
  SceneConfig cfg;
  cfg.seed = 5;
  const Scene scene = generate_scene(cfg);
  PostprocConfig pc;
  const auto boxes = extract_boxes(scene.maps, pc);
  const auto blobs = connected_components(
      binary_or(binarize(scene.maps.region, pc.region_threshold), binarize(scene.maps.link, pc.link_threshold)));
  EXPECT_LE(boxes.size(), blobs.size());
  for (const Blob& blob : blobs) {
    if (blob.area() < static_cast<std::size_t>(pc.min_blob_area)) continue;
    bool enclosed = false;
    for (const OrientedBox& b : boxes) {
      const OrientedBox g{b.center, b.width + 1e-6, b.height + 1e-6, b.theta};
      bool all = true;
      for (const PixelCoord& p : blob.pixels) all = all && contains(g.polygon(), p.center());
      enclosed = enclosed || all;
    }
    EXPECT_TRUE(enclosed);
  }
}

TEST(ExtractBoxes, SmallBlobsDropped) {
  ScoreMap region(20, 20);
  region(5, 5) = region(6, 5) = 1.0f;
  const DetectorMaps maps{region, ScoreMap(20, 20), ScoreMap(20, 20, 0.5f), ScoreMap(20, 20, 1.0f)};
  EXPECT_TRUE(extract_boxes(maps).empty());
  EXPECT_TRUE(extract_polygons(maps.region, maps.link).empty());
}

TEST(ExtractPolygons, StraightWordIsRectangle) {
  const std::vector<WordAnnotation> words{straight_word({30, 40}, 0.0, 6)};
  const DetectorMaps maps = render_detector_maps(words, {200, 80});
  const auto polys = extract_polygons(maps.region, maps.link, {}, 10);
  ASSERT_EQ(polys.size(), 1u);
  const TextPolygon& p = polys[0];
  ASSERT_EQ(p.top.size(), 10u);
  ASSERT_EQ(p.bottom.size(), 10u);
  const auto angle = [](Point a, Point b) { return std::atan2(b.y - a.y, b.x - a.x); };
  EXPECT_LT(std::abs(angle(p.top.front(), p.top.back()) - angle(p.bottom.front(), p.bottom.back())), 3.0 * kPi / 180);
  EXPECT_GE(polygon_iou(p.outline(), word_region(words[0])), 0.8);
}

TEST(ExtractPolygons, ArcWordRoundTrip) {
  SceneConfig cfg;
  cfg.width = cfg.height = 256;
  cfg.n_words = 1;
  cfg.layouts.horizontal = false;
  cfg.layouts.rotated.reset();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    cfg.seed = seed;
    const Scene scene = generate_scene(cfg);
    const auto polys = extract_polygons(scene.maps.region, scene.maps.link, {}, 10);
    ASSERT_EQ(polys.size(), 1u);
    const Polygon gt = scene.words[0].polygon->outline();
    const double iou = polygon_iou(polys[0].outline(), gt);
    EXPECT_GE(iou, 0.7) << seed;
    EXPECT_NEAR(iou, oracle::raster_iou(polys[0].outline(), gt, 512), 0.01);
  }
}

TEST(ExtractPolygons, ThinBlobFails) {
  ScoreMap region(30, 5);
  for (int x = 2; x < 28; ++x) region(x, 2) = 1.0f;
  EXPECT_THROW(extract_polygons(region, ScoreMap(30, 5)), SkeletonFailure);
  EXPECT_THROW(extract_polygons(region, ScoreMap(30, 5), {}, 1), InvalidArgument);
}

TEST(Unclip, ThresholdRadius) {
  EXPECT_NEAR(threshold_radius(std::exp(-2.0)), 0.5, 1e-12);
  const OrientedBox core{{0, 0}, 10, 2 * 0.3, 0.2};
  const OrientedBox out = unclip_box(core, 0.3);
  EXPECT_NEAR(out.height, 1.0, 1e-12);
  EXPECT_NEAR(out.width, 10.4, 1e-12);
}
