#pragma once

// JSON documents exchanged by the command-line tools:
//
//   annotation  {"width":W,"height":H,"words":[{"transcription":s,
//                 "chars":[{"quad":[[x,y]x4],"theta":t}],
//                 "polygon":{"top":[[x,y]...],"bottom":[[x,y]...]}}]}
//   boxes       {"boxes":[{"center":[x,y],"w":w,"h":h,"theta":t}],
//                "polygons":[{"top":...,"bottom":...}]}
//   eval report {"precision":p,"recall":r,"hmean":h,"matches":[[p,g,iou]...]}
//
// plus partial-override readers for every configuration struct.

#include <string>
#include <vector>

#include <json.hpp>

#include "craft/error.hpp"
#include "craft/evalkit.hpp"
#include "craft/geometry.hpp"
#include "craft/gtgen.hpp"
#include "craft/losses.hpp"
#include "craft/postproc.hpp"
#include "craft/rectify.hpp"
#include "craft/synth.hpp"

namespace craft {

using Json = nlohmann::ordered_json;

struct Annotation {
  Shape shape;
  std::vector<WordAnnotation> words;
};

namespace json {

inline Json point(Point p) { return Json::array({p.x, p.y}); }

inline Json points(std::span<const Point> pts) {
  Json a = Json::array();
  for (const Point& p : pts) a.push_back(point(p));
  return a;
}

inline Json polygon(const TextPolygon& poly) {
  Json j;
  j["top"] = points(poly.top);
  j["bottom"] = points(poly.bottom);
  return j;
}

inline Json annotation(const Annotation& a) {
  Json j;
  j["width"] = a.shape.width;
  j["height"] = a.shape.height;
  Json words = Json::array();
  for (const WordAnnotation& w : a.words) {
    Json jw;
    jw["transcription"] = w.transcription;
    Json chars = Json::array();
    for (const CharBox& c : w.chars) {
      Json jc;
      jc["quad"] = points(c.quad.corners);
      jc["theta"] = c.theta;
      chars.push_back(std::move(jc));
    }
    jw["chars"] = std::move(chars);
    if (w.polygon) jw["polygon"] = polygon(*w.polygon);
    words.push_back(std::move(jw));
  }
  j["words"] = std::move(words);
  return j;
}

inline Json boxes(std::span<const OrientedBox> bs, const std::vector<TextPolygon>* polys = nullptr) {
  Json j;
  Json arr = Json::array();
  for (const OrientedBox& b : bs) {
    Json jb;
    jb["center"] = point(b.center);
    jb["w"] = b.width;
    jb["h"] = b.height;
    jb["theta"] = b.theta;
    arr.push_back(std::move(jb));
  }
  j["boxes"] = std::move(arr);
  if (polys) {
    Json pa = Json::array();
    for (const TextPolygon& p : *polys) pa.push_back(polygon(p));
    j["polygons"] = std::move(pa);
  }
  return j;
}

inline Json report(const EvalReport& r) {
  Json j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["hmean"] = r.hmean;
  Json m = Json::array();
  for (const Match& x : r.matches) m.push_back(Json::array({x.pred, x.gt, x.iou}));
  j["matches"] = std::move(m);
  return j;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

[[noreturn]] inline void fail(const std::string& what) { throw FormatError(what); }

inline double number(const Json& j, const char* what) {
  if (!j.is_number()) fail(std::string(what) + ": expected a number");
  return j.get<double>();
}

}  // namespace detail

inline Point parse_point(const Json& j) {
  if (!j.is_array() || j.size() != 2) detail::fail("point: expected [x, y]");
  const Point p{detail::number(j[0], "point.x"), detail::number(j[1], "point.y")};
  if (!is_finite(p)) detail::fail("point: non-finite coordinate");
  return p;
}

inline std::vector<Point> parse_points(const Json& j) {
  if (!j.is_array()) detail::fail("expected an array of points");
  std::vector<Point> out;
  for (const Json& p : j) out.push_back(parse_point(p));
  return out;
}

inline TextPolygon parse_polygon(const Json& j) {
  if (!j.is_object() || !j.contains("top") || !j.contains("bottom")) {
    detail::fail("polygon: expected {\"top\":..., \"bottom\":...}");
  }
  TextPolygon poly{parse_points(j["top"]), parse_points(j["bottom"])};
  try {
    poly.validate();
  } catch (const InvalidArgument& e) {
    detail::fail(e.what());
  }
  return poly;
}

inline Annotation parse_annotation(const Json& j) {
  if (!j.is_object()) detail::fail("annotation: expected an object");
  for (const char* key : {"width", "height", "words"}) {
    if (!j.contains(key)) detail::fail(std::string("annotation: missing \"") + key + "\"");
  }
  Annotation a;
  if (!j["width"].is_number_integer() || !j["height"].is_number_integer()) {
    detail::fail("annotation: width and height must be integers");
  }
  a.shape = {j["width"].get<int>(), j["height"].get<int>()};
  if (a.shape.width <= 0 || a.shape.height <= 0) detail::fail("annotation: dimensions must be > 0");
  if (!j["words"].is_array()) detail::fail("annotation: words must be an array");
  for (const Json& jw : j["words"]) {
    WordAnnotation w;
    if (jw.contains("transcription")) {
      if (!jw["transcription"].is_string()) detail::fail("word: transcription must be a string");
      w.transcription = jw["transcription"].get<std::string>();
    }
    if (!jw.contains("chars") || !jw["chars"].is_array()) detail::fail("word: missing chars array");
    for (const Json& jc : jw["chars"]) {
      if (!jc.contains("quad")) detail::fail("char: missing quad");
      const std::vector<Point> q = parse_points(jc["quad"]);
      if (q.size() != 4) detail::fail("char: quad needs exactly 4 points");
      CharBox c{Quad{{q[0], q[1], q[2], q[3]}}, 0.0};
      c.theta = jc.contains("theta") ? detail::number(jc["theta"], "char.theta") : quad_angle(c.quad);
      w.chars.push_back(c);
    }
    if (jw.contains("polygon") && !jw["polygon"].is_null()) w.polygon = parse_polygon(jw["polygon"]);
    a.words.push_back(std::move(w));
  }
  return a;
}

inline std::vector<OrientedBox> parse_boxes(const Json& j) {
  if (!j.is_object() || !j.contains("boxes") || !j["boxes"].is_array()) {
    detail::fail("boxes: expected {\"boxes\":[...]}");
  }
  std::vector<OrientedBox> out;
  for (const Json& jb : j["boxes"]) {
    if (!jb.contains("center") || !jb.contains("w") || !jb.contains("h") || !jb.contains("theta")) {
      detail::fail("box: expected center, w, h, theta");
    }
    out.push_back(OrientedBox{parse_point(jb["center"]), detail::number(jb["w"], "box.w"),
                              detail::number(jb["h"], "box.h"), detail::number(jb["theta"], "box.theta")});
  }
  return out;
}

inline std::vector<TextPolygon> parse_polygons(const Json& j) {
  std::vector<TextPolygon> out;
  if (j.is_object() && j.contains("polygons")) {
    if (!j["polygons"].is_array()) detail::fail("polygons must be an array");
    for (const Json& p : j["polygons"]) out.push_back(parse_polygon(p));
  }
  return out;
}

/// Outlines to score from either a boxes document (its polygons when
/// present, else its boxes) or an annotation document (each word's polygon
/// when present, else the hull of its characters).
inline std::vector<Polygon> parse_detections(const Json& j) {
  std::vector<Polygon> out;
  if (j.is_object() && j.contains("boxes")) {
    const auto polys = parse_polygons(j);
    if (!polys.empty()) {
      for (const TextPolygon& p : polys) out.push_back(p.outline());
    } else {
      for (const OrientedBox& b : parse_boxes(j)) out.push_back(b.polygon());
    }
    return out;
  }
  for (const WordAnnotation& w : parse_annotation(j).words) out.push_back(word_region(w));
  return out;
}

inline Json parse_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(origin + ": invalid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Configuration overrides: only keys present in the document are applied.

namespace detail {

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j[key].get<T>();
  } catch (const Json::exception&) {
    fail(std::string("config: bad value for \"") + key + "\"");
  }
}

inline void read_range(const Json& j, const char* key, Range& out) {
  if (!j.contains(key)) return;
  const Json& r = j[key];
  if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
    fail(std::string("config: \"") + key + "\" must be [lo, hi]");
  }
  out = {r[0].get<double>(), r[1].get<double>()};
}

inline void read_optional_range(const Json& j, const char* key, std::optional<Range>& out) {
  if (!j.contains(key)) return;
  if (j[key].is_null() || (j[key].is_boolean() && !j[key].get<bool>())) {
    out.reset();
    return;
  }
  Range r;
  read_range(j, key, r);
  out = r;
}

}  // namespace detail

inline void apply(const Json& j, GtConfig& c) {
  detail::read(j, "alpha", c.alpha);
  detail::read(j, "gaussian_peak", c.gaussian_peak);
  detail::read(j, "gaussian_radius_ratio", c.gaussian_radius_ratio);
  detail::read(j, "linkrefiner_beta", c.linkrefiner_beta);
}

inline void apply(const Json& j, PostprocConfig& c) {
  detail::read(j, "region_threshold", c.region_threshold);
  detail::read(j, "link_threshold", c.link_threshold);
  detail::read(j, "min_blob_area", c.min_blob_area);
  detail::read(j, "unclip", c.unclip);
}

inline void apply(const Json& j, LossConfig& c) {
  detail::read(j, "lambda_theta", c.lambda_theta);
  detail::read(j, "ohem_neg_pos_ratio", c.ohem_neg_pos_ratio);
  detail::read(j, "positive_threshold", c.positive_threshold);
}

inline void apply(const Json& j, RectifyConfig& c) {
  detail::read(j, "iterations", c.iterations);
  detail::read(j, "regularization", c.regularization);
  detail::read(j, "canonical_height", c.canonical_height);
  detail::read(j, "min_width", c.min_width);
  detail::read(j, "max_width", c.max_width);
  detail::read(j, "band_fraction", c.band_fraction);
}

inline void apply(const Json& j, SceneConfig& c) {
  detail::read(j, "width", c.width);
  detail::read(j, "height", c.height);
  detail::read(j, "n_words", c.n_words);
  detail::read_range(j, "char_size", c.char_size);
  detail::read(j, "seed", c.seed);
  detail::read(j, "noise_sigma", c.noise_sigma);
  detail::read(j, "min_chars", c.min_chars);
  detail::read(j, "max_chars", c.max_chars);
  if (j.contains("layouts")) {
    const Json& l = j["layouts"];
    detail::read(l, "horizontal", c.layouts.horizontal);
    detail::read_optional_range(l, "rotated", c.layouts.rotated);
    detail::read_optional_range(l, "arc_radius", c.layouts.arc_radius);
  }
  if (j.contains("gt")) apply(j["gt"], c.gt);
}

inline Json to_json(const GtConfig& c) {
  return Json{{"alpha", c.alpha},
              {"gaussian_peak", c.gaussian_peak},
              {"gaussian_radius_ratio", c.gaussian_radius_ratio},
              {"linkrefiner_beta", c.linkrefiner_beta}};
}

inline Json to_json(const PostprocConfig& c) {
  return Json{{"region_threshold", c.region_threshold},
              {"link_threshold", c.link_threshold},
              {"min_blob_area", c.min_blob_area},
              {"unclip", c.unclip}};
}

inline Json to_json(const LossConfig& c) {
  return Json{{"lambda_theta", c.lambda_theta},
              {"ohem_neg_pos_ratio", c.ohem_neg_pos_ratio},
              {"positive_threshold", c.positive_threshold}};
}

inline Json to_json(const RectifyConfig& c) {
  return Json{{"iterations", c.iterations},         {"regularization", c.regularization},
              {"canonical_height", c.canonical_height}, {"min_width", c.min_width},
              {"max_width", c.max_width},           {"band_fraction", c.band_fraction}};
}

inline Json to_json(const SceneConfig& c) {
  const auto range = [](const std::optional<Range>& r) {
    return r ? Json::array({r->lo, r->hi}) : Json(nullptr);
  };
  Json layouts{{"horizontal", c.layouts.horizontal},
               {"rotated", range(c.layouts.rotated)},
               {"arc_radius", range(c.layouts.arc_radius)}};
  return Json{{"width", c.width},
              {"height", c.height},
              {"n_words", c.n_words},
              {"char_size", Json::array({c.char_size.lo, c.char_size.hi})},
              {"layouts", std::move(layouts)},
              {"seed", c.seed},
              {"noise_sigma", c.noise_sigma},
              {"min_chars", c.min_chars},
              {"max_chars", c.max_chars},
              {"gt", to_json(c.gt)}};
}

}  // namespace json

inline Annotation scene_annotation(const Scene& scene) {
  return Annotation{Shape{scene.config.width, scene.config.height}, scene.words};
}

}  // namespace craft
