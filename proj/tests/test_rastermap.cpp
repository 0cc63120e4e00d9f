#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "craft/rastermap.hpp"
#include "oracles.hpp"

using namespace craft;

TEST(Map, RejectsEmptyDimensions) {
  EXPECT_THROW(ScoreMap(0, 3), InvalidArgument);
  EXPECT_THROW(ScoreMap(3, -1), InvalidArgument);
}

TEST(SampleBilinear, LatticeMidpointOutside) {
  ScoreMap m(3, 2);
  m(0, 0) = 0.0f;
  m(1, 0) = 1.0f;
  m(2, 1) = 0.25f;
  EXPECT_DOUBLE_EQ(sample_bilinear(m, 1, 0), 1.0);
  EXPECT_DOUBLE_EQ(sample_bilinear(m, 2, 1), 0.25);
  EXPECT_DOUBLE_EQ(sample_bilinear(m, 0.5, 0), 0.5);
  EXPECT_DOUBLE_EQ(sample_bilinear(m, -5, -5), 0.0);
  EXPECT_DOUBLE_EQ(sample_bilinear(m, 2.0001, 0), 0.0);
}

TEST(SampleBilinear, LipschitzAlongAxis) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0, 1);
  ScoreMap m(16, 16);
  for (float& v : m.values()) v = u(rng);
  std::uniform_real_distribution<double> pos(0, 14);
  for (int t = 0; t < 500; ++t) {
    const double x = pos(rng), y = pos(rng), d = 0.3 * u(rng);
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    double lo = 1, hi = 0;
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 2; ++dx) lo = std::min<double>(lo, m(x0 + dx, y0 + dy)), hi = std::max<double>(hi, m(x0 + dx, y0 + dy));
    EXPECT_LE(std::abs(sample_bilinear(m, x + d, y) - sample_bilinear(m, x, y)), d * (hi - lo) + 1e-6);
  }
}

TEST(DrawSegment, DiscForDegenerateSegment) {
  const ScoreMap m = draw_segment(ScoreMap(9, 9), {4, 4}, {4, 4}, 3.0, 1.0);
  int painted = 0;
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      const bool in = std::hypot(x - 4.0, y - 4.0) <= 1.5;
      EXPECT_EQ(m(x, y) == 1.0f, in);
      painted += in;
    }
  EXPECT_EQ(painted, 9);
}

TEST(DrawSegment, MatchesDistanceScan) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 40);
  for (int t = 0; t < 30; ++t) {
    const Point a{u(rng), u(rng)}, b{u(rng), u(rng)};
    const double thick = 1.0 + u(rng) / 8;
    const ScoreMap m = draw_segment(ScoreMap(40, 40), a, b, thick, 0.7);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 40; ++x)
        EXPECT_EQ(m(x, y) > 0, oracle::near_segment({double(x), double(y)}, a, b, thick / 2)) << x << "," << y;
  }
  const ScoreMap h = draw_segment(ScoreMap(20, 10), {5, 5}, {15, 5}, 2.0, 1.0);
  int count = 0;
  for (float v : h.values()) count += v > 0;
  int expected = 0;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 20; ++x) expected += oracle::near_segment({double(x), double(y)}, {5, 5}, {15, 5}, 1.0);
  EXPECT_EQ(count, expected);
}

TEST(DrawSegment, MaxCompositeIdempotentAndValidated) {
  ScoreMap base(10, 10, 0.5f);
  const ScoreMap once = draw_segment(base, {1, 1}, {8, 3}, 2.5, 0.9);
  EXPECT_EQ(draw_segment(once, {1, 1}, {8, 3}, 2.5, 0.9), once);
  EXPECT_EQ(draw_segment(base, {1, 1}, {8, 3}, 2.5, 0.2), base);
  EXPECT_EQ(draw_segment(ScoreMap(5, 5), {0, 0}, {4, 4}, 2, 0.0), ScoreMap(5, 5));
  EXPECT_THROW(draw_segment(base, {0, 0}, {1, 1}, 0.5, 1.0), InvalidArgument);
  const ScoreMap clamped = draw_segment(ScoreMap(5, 5), {2, 2}, {2, 2}, 1, 7.0);
  EXPECT_EQ(clamped(2, 2), 1.0f);
}

TEST(Crmap, RoundTripBitExact) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0, 1);
  std::vector<ScoreMap> maps(4, ScoreMap(64, 64));
  for (auto& m : maps)
    for (float& v : m.values()) v = u(rng);
  maps[2][17] = -0.0f;
  maps[3][5] = std::numeric_limits<float>::denorm_min();
  const std::string bytes = encode_maps(maps);
  EXPECT_EQ(bytes.substr(0, 15), "CRMAP1 64 64 4\n");
  EXPECT_EQ(bytes.size(), std::string("CRMAP1 64 64 4\n").size() + 4 * 64 * 64 * 4);
  const auto back = decode_maps(bytes);
  ASSERT_EQ(back.size(), 4u);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < maps[c].size(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint32_t>(back[c][i]), std::bit_cast<std::uint32_t>(maps[c][i]));
    }
  }
}

TEST(Crmap, LittleEndianLayout) {
  ScoreMap m(1, 1, 1.0f);
  const std::string bytes = encode_maps(std::vector<ScoreMap>{m});
  const std::string payload = bytes.substr(bytes.find('\n') + 1);
  ASSERT_EQ(payload.size(), 4u);
  EXPECT_EQ(static_cast<unsigned char>(payload[0]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(payload[2]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(payload[3]), 0x3F);
}

TEST(Crmap, Errors) {
  const std::string good = encode_maps(std::vector<ScoreMap>{ScoreMap(3, 2, 0.5f)});
  EXPECT_THROW(decode_maps("CRMAP2" + good.substr(6)), FormatError);
  EXPECT_THROW(decode_maps(good.substr(0, good.size() - 1)), FormatError);
  EXPECT_THROW(decode_maps(good + "x"), FormatError);
  EXPECT_THROW(decode_maps("CRMAP1 0 2 1\n"), FormatError);
  EXPECT_THROW(decode_maps("garbage"), FormatError);
  EXPECT_THROW(encode_maps(std::vector<ScoreMap>{ScoreMap(3, 2), ScoreMap(2, 3)}), FormatError);
  EXPECT_THROW(encode_maps(std::vector<ScoreMap>{}), FormatError);
}

TEST(Crmap, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "craft_rastermap_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "m.crmap";
  std::vector<ScoreMap> maps{ScoreMap(7, 5, 0.25f), ScoreMap(7, 5, 0.75f)};
  write_map(maps, path);
  EXPECT_FALSE(std::filesystem::exists(dir / "m.crmap.tmp"));
  EXPECT_EQ(read_map(path), maps);
  EXPECT_THROW(read_map(dir / "missing.crmap"), FormatError);
  std::filesystem::remove_all(dir);
}
