#pragma once

// IoU-based detection scoring and the character-error-length diagnostic.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "craft/error.hpp"
#include "craft/geometry.hpp"
#include "craft/gtgen.hpp"
#include "craft/postproc.hpp"
#include "craft/rastermap.hpp"

namespace craft {

struct Match {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;
  friend bool operator==(const Match&, const Match&) = default;
};

struct EvalReport {
  std::vector<Match> matches;
  double precision = 0.0;
  double recall = 0.0;
  double hmean = 0.0;
};

inline double harmonic_mean(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Greedy one-to-one matching in descending IoU order (ties by pred index,
/// then gt index). Pairs at or above `iou_threshold` are true positives.
/// With no predictions and no ground truth the report is perfect.
inline EvalReport match_detections(std::span<const Polygon> preds, std::span<const Polygon> gts,
                                   double iou_threshold = 0.5) {
  EvalReport report;
  if (preds.empty() && gts.empty()) {
    report.precision = report.recall = report.hmean = 1.0;
    return report;
  }
  std::vector<Match> candidates;
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double iou = polygon_iou(preds[p], gts[g]);
      if (iou >= iou_threshold && iou > 0.0) candidates.push_back({p, g, iou});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Match& a, const Match& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });
  std::vector<bool> pred_used(preds.size(), false), gt_used(gts.size(), false);
  for (const Match& m : candidates) {
    if (pred_used[m.pred] || gt_used[m.gt]) continue;
    pred_used[m.pred] = gt_used[m.gt] = true;
    report.matches.push_back(m);
  }
  const auto tp = static_cast<double>(report.matches.size());
  report.precision = preds.empty() ? 0.0 : tp / static_cast<double>(preds.size());
  report.recall = gts.empty() ? 0.0 : tp / static_cast<double>(gts.size());
  report.hmean = harmonic_mean(report.precision, report.recall);
  return report;
}

/// Number of separate peaks of the region map inside the word region: the
/// pixels at or above half the word's maximum, counted as 8-connected
/// components.
inline int count_pseudo_characters(const ScoreMap& region, const WordAnnotation& word) {
  const Polygon hull = word_region(word);
  BinaryMap inside(region.shape());
  double peak = 0.0;
  detail::for_each_pixel_inside(hull, region.shape(), [&](int x, int y) {
    inside(x, y) = 1;
    peak = std::max(peak, static_cast<double>(region(x, y)));
  });
  if (!(peak > 0.0)) throw EmptyRegion("character_error_length: no region mass inside the word");
  BinaryMap peaks(region.shape());
  for (std::size_t i = 0; i < region.size(); ++i) {
    peaks[i] = (inside[i] && region[i] >= 0.5 * peak) ? 1 : 0;
  }
  return static_cast<int>(connected_components(peaks).size());
}

inline int character_error_length(const ScoreMap& region, const WordAnnotation& word, int expected) {
  return std::abs(count_pseudo_characters(region, word) - expected);
}

/// Sum of character_error_length over words with their transcription lengths.
inline int total_character_error_length(const ScoreMap& region, std::span<const WordAnnotation> words,
                                        std::span<const int> expected) {
  if (words.size() != expected.size()) throw InvalidArgument("character_error_length: size mismatch");
  int total = 0;
  for (std::size_t i = 0; i < words.size(); ++i) total += character_error_length(region, words[i], expected[i]);
  return total;
}

}  // namespace craft
