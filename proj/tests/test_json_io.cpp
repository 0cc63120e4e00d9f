#include <gtest/gtest.h>

#include "craft/json_io.hpp"

using namespace craft;

TEST(JsonIo, AnnotationRoundTrip) {
  SceneConfig cfg;
  cfg.seed = 9;
  const Scene s = generate_scene(cfg);
  const Json j = json::annotation(scene_annotation(s));
  const Annotation back = json::parse_annotation(json::parse_text(j.dump(), "mem"));
  EXPECT_EQ(back.shape, (Shape{512, 512}));
  ASSERT_EQ(back.words.size(), s.words.size());
  for (std::size_t i = 0; i < s.words.size(); ++i) {
    EXPECT_EQ(back.words[i].transcription, s.words[i].transcription);
    ASSERT_EQ(back.words[i].chars.size(), s.words[i].chars.size());
    for (std::size_t c = 0; c < s.words[i].chars.size(); ++c) {
      EXPECT_EQ(back.words[i].chars[c].quad.corners, s.words[i].chars[c].quad.corners);
      EXPECT_EQ(back.words[i].chars[c].theta, s.words[i].chars[c].theta);
    }
    ASSERT_TRUE(back.words[i].polygon.has_value());
    EXPECT_EQ(back.words[i].polygon->top, s.words[i].polygon->top);
  }
  EXPECT_EQ(json::annotation(back).dump(), j.dump());
}

TEST(JsonIo, MissingThetaReadFromQuad) {
  const auto j = json::parse_text(
      R"({"width":10,"height":10,"words":[{"transcription":"a","chars":[{"quad":[[0,0],[4,0],[4,4],[0,4]]}]}]})", "mem");
  const Annotation a = json::parse_annotation(j);
  EXPECT_EQ(a.words[0].chars[0].theta, 0.0);
  EXPECT_FALSE(a.words[0].polygon.has_value());
}

TEST(JsonIo, BoxesAndDetections) {
  const std::vector<OrientedBox> bs{{{10, 20}, 30, 8, 0.1}};
  const std::vector<TextPolygon> polys{{{{0, 0}, {10, 0}}, {{0, 5}, {10, 5}}}};
  EXPECT_EQ(json::boxes(std::vector<OrientedBox>{}).dump(), R"({"boxes":[]})");
  const Json with = json::boxes(bs, &polys);
  const auto parsed = json::parse_boxes(with);
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0].center, bs[0].center);
  EXPECT_EQ(parsed[0].theta, 0.1);
  EXPECT_EQ(json::parse_detections(with).at(0), polys[0].outline());
  EXPECT_EQ(json::parse_detections(json::boxes(bs)).at(0), bs[0].polygon());
}

TEST(JsonIo, Report) {
  EvalReport r;
  r.precision = 0.5;
  r.recall = 1.0;
  r.hmean = 2.0 / 3.0;
  r.matches.push_back({1, 0, 0.75});
  const Json j = json::report(r);
  EXPECT_EQ(j["matches"].dump(), "[[1,0,0.75]]");
  EXPECT_EQ(j.begin().key(), "precision");
}

TEST(JsonIo, MalformedInputs) {
  EXPECT_THROW(json::parse_text("{", "x.json"), FormatError);
  EXPECT_THROW(json::parse_annotation(Json::parse(R"({"width":1})")), FormatError);
  EXPECT_THROW(json::parse_annotation(Json::parse(R"({"width":0,"height":1,"words":[]})")), FormatError);
  EXPECT_THROW(json::parse_annotation(Json::parse(R"({"width":2,"height":1,"words":[{"chars":[{"quad":[[0,0]]}]}]})")),
               FormatError);
  EXPECT_THROW(json::parse_boxes(Json::parse(R"({"boxes":[{"center":[0,0]}]})")), FormatError);
  EXPECT_THROW(json::parse_point(Json::parse(R"(["a",1])")), FormatError);
  EXPECT_THROW(json::parse_polygon(Json::parse(R"({"top":[[0,0]],"bottom":[[0,1],[1,1]]})")), FormatError);
}

TEST(JsonIo, ConfigOverrides) {
  PostprocConfig pc;
  json::apply(Json::parse(R"({"link_threshold":0.6})"), pc);
  EXPECT_EQ(pc.link_threshold, 0.6);
  EXPECT_EQ(pc.region_threshold, PostprocConfig{}.region_threshold);
  EXPECT_THROW(json::apply(Json::parse(R"({"min_blob_area":"big"})"), pc), FormatError);

  SceneConfig sc;
  json::apply(Json::parse(R"({"width":100,"layouts":{"rotated":null,"arc_radius":[50,60]},"gt":{"alpha":0.2}})"), sc);
  EXPECT_EQ(sc.width, 100);
  EXPECT_FALSE(sc.layouts.rotated.has_value());
  EXPECT_EQ(sc.layouts.arc_radius->lo, 50);
  EXPECT_EQ(sc.gt.alpha, 0.2);

  SceneConfig again;
  json::apply(json::to_json(sc), again);
  EXPECT_EQ(json::to_json(again).dump(), json::to_json(sc).dump());

  RectifyConfig rc;
  json::apply(json::to_json(RectifyConfig{}), rc);
  EXPECT_EQ(rc.iterations, 3);
  LossConfig lc;
  json::apply(Json::parse(R"({"lambda_theta":0.5})"), lc);
  EXPECT_EQ(lc.lambda_theta, 0.5);
  GtConfig gc;
  json::apply(json::to_json(gc), gc);
  EXPECT_EQ(json::to_json(gc).dump(), json::to_json(GtConfig{}).dump());
}
