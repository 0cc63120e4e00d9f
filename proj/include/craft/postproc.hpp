#pragma once

// Detector maps -> text instances: thresholding, 8-connected labeling,
// blob-to-box fitting with orientation from the sin/cos channels, and
// centerline-based polygon extraction for curved text.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <vector>

#include "craft/error.hpp"
#include "craft/geometry.hpp"
#include "craft/gtgen.hpp"
#include "craft/rastermap.hpp"

namespace craft {

struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(PixelCoord, PixelCoord) = default;
  Point center() const { return {double(x), double(y)}; }
};

/// Inclusive pixel rectangle.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  friend bool operator==(PixelRect, PixelRect) = default;
};

struct Blob {
  int label = 0;
  std::vector<PixelCoord> pixels;  ///< row-major order
  PixelRect bounds;

  std::size_t area() const { return pixels.size(); }
};

struct PostprocConfig {
  double region_threshold = 0.4;
  double link_threshold = 0.4;
  int min_blob_area = 10;
  /// Grow boxes and polygons from the thresholded core back out to the
  /// character outline implied by the region Gaussian.
  bool unclip = true;

  void validate() const {
    if (!(region_threshold > 0.0 && region_threshold < 1.0) ||
        !(link_threshold > 0.0 && link_threshold < 1.0)) {
      throw InvalidArgument("PostprocConfig: thresholds must lie in (0, 1)");
    }
    if (min_blob_area < 0) throw InvalidArgument("PostprocConfig: min_blob_area must be >= 0");
  }
};

template <class T>
BinaryMap binarize(const Map<T>& map, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidArgument("binarize: threshold must lie in (0, 1)");
  }
  BinaryMap out(map.shape());
  for (std::size_t i = 0; i < map.size(); ++i) {
    out[i] = static_cast<double>(map[i]) >= threshold ? 1 : 0;
  }
  return out;
}

inline BinaryMap binary_or(const BinaryMap& a, const BinaryMap& b) {
  if (a.shape() != b.shape()) throw InvalidArgument("binary_or: shape mismatch");
  BinaryMap out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
  return out;
}

/// Label image: -1 for background, otherwise the blob label.
using LabelMap = Map<int>;

struct Components {
  LabelMap labels;
  std::vector<Blob> blobs;
};

/// 8-connected labeling. Labels are assigned in row-major order of each
/// component's first pixel, starting at 0.
inline Components label_components(const BinaryMap& binary) {
  Components out{LabelMap(binary.shape(), -1), {}};
  const int w = binary.width();
  const int h = binary.height();
  std::vector<PixelCoord> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!binary(x, y) || out.labels(x, y) >= 0) continue;
      Blob blob;
      blob.label = static_cast<int>(out.blobs.size());
      blob.bounds = {x, y, x, y};
      out.labels(x, y) = blob.label;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const PixelCoord p = stack.back();
        stack.pop_back();
        blob.pixels.push_back(p);
        blob.bounds.x0 = std::min(blob.bounds.x0, p.x), blob.bounds.x1 = std::max(blob.bounds.x1, p.x);
        blob.bounds.y0 = std::min(blob.bounds.y0, p.y), blob.bounds.y1 = std::max(blob.bounds.y1, p.y);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx, ny = p.y + dy;
            if (!binary.in_bounds(nx, ny) || !binary(nx, ny) || out.labels(nx, ny) >= 0) continue;
            out.labels(nx, ny) = blob.label;
            stack.push_back({nx, ny});
          }
        }
      }
      std::sort(blob.pixels.begin(), blob.pixels.end(), [](PixelCoord a, PixelCoord b) {
        return a.y < b.y || (a.y == b.y && a.x < b.x);
      });
      out.blobs.push_back(std::move(blob));
    }
  }
  return out;
}

inline std::vector<Blob> connected_components(const BinaryMap& binary) {
  return label_components(binary).blobs;
}

/// Text angle of a blob from the orientation channels, weighted by region
/// confidence. Result in (-pi, pi].
template <class T>
double estimate_orientation(const Map<T>& region, const Map<T>& sin_map, const Map<T>& cos_map,
                            const Blob& blob) {
  if (blob.pixels.empty()) throw InvalidArgument("estimate_orientation: empty blob");
  if (sin_map.shape() != region.shape() || cos_map.shape() != region.shape()) {
    throw InvalidArgument("estimate_orientation: shape mismatch");
  }
  double num = 0.0, den = 0.0;
  for (const PixelCoord& p : blob.pixels) {
    const double w = region(p.x, p.y);
    num += w * (static_cast<double>(sin_map(p.x, p.y)) - 0.5);
    den += w * (static_cast<double>(cos_map(p.x, p.y)) - 0.5);
  }
  if (std::abs(num) < 1e-9 && std::abs(den) < 1e-9) {
    throw OrientationUndefined("estimate_orientation: accumulated sine and cosine vanish");
  }
  return wrap_pi(std::atan2(num, den));
}

/// Offset (in character heights, from the character center) at which the
/// region Gaussian drops to `threshold`.
inline double threshold_radius(double threshold) {
  return kGaussianSigma * std::sqrt(2.0 * std::log(1.0 / threshold));
}

/// Grows a box fitted around a thresholded word core (width along the text)
/// to the word outline: the core height spans 2r character heights, and each
/// end sits r short of the outer character edge.
inline OrientedBox unclip_box(OrientedBox core, double radius) {
  const double char_height = core.height / (2.0 * radius);
  core.width += (1.0 - 2.0 * radius) * char_height;
  core.height = char_height;
  return core;
}

namespace detail {

// Corners of the unit squares covered by the blob pixels.
inline std::vector<Point> pixel_footprint(const Blob& blob) {
  std::vector<Point> pts;
  pts.reserve(blob.pixels.size() * 4);
  for (const PixelCoord& p : blob.pixels) {
    pts.push_back({p.x - 0.5, p.y - 0.5});
    pts.push_back({p.x + 0.5, p.y - 0.5});
    pts.push_back({p.x + 0.5, p.y + 0.5});
    pts.push_back({p.x - 0.5, p.y + 0.5});
  }
  return pts;
}

inline Components detection_components(const ScoreMap& region, const ScoreMap& link,
                                       const PostprocConfig& cfg) {
  cfg.validate();
  if (region.shape() != link.shape()) throw InvalidArgument("postproc: shape mismatch");
  return label_components(
      binary_or(binarize(region, cfg.region_threshold), binarize(link, cfg.link_threshold)));
}

}  // namespace detail

/// One oriented box per text blob.
inline std::vector<OrientedBox> extract_boxes(const DetectorMaps& maps,
                                              const PostprocConfig& cfg = {}) {
  if (!maps.consistent()) throw InvalidArgument("extract_boxes: channel size mismatch");
  const Components comps = detail::detection_components(maps.region, maps.link, cfg);
  const double radius = threshold_radius(cfg.region_threshold);
  std::vector<OrientedBox> boxes;
  for (const Blob& blob : comps.blobs) {
    if (blob.area() < static_cast<std::size_t>(cfg.min_blob_area)) continue;
    const std::vector<Point> footprint = detail::pixel_footprint(blob);
    OrientedBox box;
    try {
      const double theta = estimate_orientation(maps.region, maps.sin, maps.cos, blob);
      box = enclosing_box(footprint, theta);
    } catch (const OrientationUndefined&) {
      box = min_area_rect(footprint);
    }
    if (cfg.unclip) box = unclip_box(box, radius);
    boxes.push_back(canonicalize(box));
  }
  return boxes;
}

// ---------------------------------------------------------------------------
// Polygon extraction

namespace detail {

// Pixels of one blob addressed through a local grid over its bounds.
class BlobGrid {
 public:
  explicit BlobGrid(const Blob& blob) : blob_(blob), r_(blob.bounds) {
    index_.assign(static_cast<std::size_t>(r_.width()) * r_.height(), -1);
    for (std::size_t i = 0; i < blob.pixels.size(); ++i) {
      index_[slot(blob.pixels[i].x, blob.pixels[i].y)] = static_cast<int>(i);
    }
  }

  int at(int x, int y) const {
    if (x < r_.x0 || x > r_.x1 || y < r_.y0 || y > r_.y1) return -1;
    return index_[slot(x, y)];
  }
  std::size_t size() const { return blob_.pixels.size(); }
  const PixelCoord& pixel(std::size_t i) const { return blob_.pixels[i]; }

  /// True when some 2x2 block lies entirely inside the blob.
  bool has_thick_part() const {
    for (const PixelCoord& p : blob_.pixels) {
      if (at(p.x + 1, p.y) >= 0 && at(p.x, p.y + 1) >= 0 && at(p.x + 1, p.y + 1) >= 0) return true;
    }
    return false;
  }

  /// Shortest 8-connected path lengths (diagonal steps cost sqrt 2) from the
  /// given seeds, each starting at its seed distance.
  std::vector<double> geodesic(const std::vector<std::pair<int, double>>& seeds) const {
    std::vector<double> dist(size(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (const auto& [i, d] : seeds) {
      if (d < dist[i]) dist[i] = d, queue.push({d, i});
    }
    while (!queue.empty()) {
      const auto [d, i] = queue.top();
      queue.pop();
      if (d > dist[i]) continue;
      const PixelCoord p = pixel(static_cast<std::size_t>(i));
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int j = at(p.x + dx, p.y + dy);
          if (j < 0) continue;
          const double nd = d + ((dx != 0 && dy != 0) ? std::numbers::sqrt2 : 1.0);
          if (nd < dist[j]) dist[j] = nd, queue.push({nd, j});
        }
      }
    }
    return dist;
  }

 private:
  std::size_t slot(int x, int y) const {
    return static_cast<std::size_t>(y - r_.y0) * r_.width() + (x - r_.x0);
  }

  const Blob& blob_;
  PixelRect r_;
  std::vector<int> index_;
};

inline std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline Point unit_or(Point v, Point fallback) {
  const double n = norm(v);
  return n > 1e-12 ? v / n : fallback;
}

inline std::vector<Point> tangents(std::span<const Point> line) {
  std::vector<Point> t(line.size(), Point{1, 0});
  const std::size_t n = line.size();
  if (n < 2) return t;
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = line[i == 0 ? 0 : i - 1];
    const Point b = line[i + 1 == n ? n - 1 : i + 1];
    t[i] = unit_or(b - a, i > 0 ? t[i - 1] : Point{1, 0});
  }
  return t;
}

struct Extent {
  double top = 0.0;
  double bottom = 0.0;
};

// Largest offsets above / below the station among blob pixels whose
// projection on the tangent lies within `half_window` of the station.
inline std::vector<Extent> station_extents(const BlobGrid& grid, std::span<const Point> stations,
                                           double half_window) {
  const std::vector<Point> tan = tangents(stations);
  std::vector<Extent> ext(stations.size());
  std::vector<bool> found(stations.size(), false);
  for (std::size_t k = 0; k < stations.size(); ++k) {
    const Point up{tan[k].y, -tan[k].x};
    double top = -std::numeric_limits<double>::infinity(), bottom = top;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Point d = grid.pixel(i).center() - stations[k];
      if (std::abs(dot(d, tan[k])) > half_window) continue;
      const double off = dot(d, up);
      top = std::max(top, off);
      bottom = std::max(bottom, -off);
    }
    if (std::isfinite(top)) {
      ext[k] = {std::max(top, 0.0) + 0.5, std::max(bottom, 0.0) + 0.5};
      found[k] = true;
    }
  }
  // Stations with no pixels nearby borrow from the nearest measured one.
  for (std::size_t k = 0; k < stations.size(); ++k) {
    if (found[k]) continue;
    for (std::size_t d = 1; d < stations.size(); ++d) {
      if (k >= d && found[k - d]) { ext[k] = ext[k - d]; break; }
      if (k + d < stations.size() && found[k + d]) { ext[k] = ext[k + d]; break; }
    }
  }
  return ext;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

inline TextPolygon blob_polygon(const Blob& blob, const PostprocConfig& cfg, int stations_k) {
  const BlobGrid grid(blob);
  if (!grid.has_thick_part()) {
    throw SkeletonFailure("extract_polygons: blob is thinner than 2 pixels everywhere");
  }

  // Geodesic diameter: farthest pixel from an arbitrary start, then the
  // distance field from that end parameterizes the centerline.
  const std::size_t start = argmax(grid.geodesic({{0, 0.0}}));
  const std::vector<double> along = grid.geodesic({{static_cast<int>(start), 0.0}});
  const double length = along[argmax(along)];

  // Local half-thickness: geodesic distance to the blob boundary.
  std::vector<std::pair<int, double>> rim;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const PixelCoord p = grid.pixel(i);
    bool edge = false;
    for (int dy = -1; dy <= 1 && !edge; ++dy) {
      for (int dx = -1; dx <= 1 && !edge; ++dx) edge = grid.at(p.x + dx, p.y + dy) < 0;
    }
    if (edge) rim.push_back({static_cast<int>(i), 0.5});
  }
  const std::vector<double> depth = grid.geodesic(rim);
  const double thickness = 2.0 * depth[argmax(depth)];

  // Centerline: centroids of slices of equal geodesic distance.
  const double bin = std::max(1.5, thickness / 4.0);
  const auto bins = static_cast<std::size_t>(length / bin) + 1;
  std::vector<Point> sum(bins);
  std::vector<double> count(bins, 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>(along[i] / bin));
    sum[b] = sum[b] + grid.pixel(i).center();
    count[b] += 1.0;
  }
  std::vector<Point> centers;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] > 0) centers.push_back(sum[b] / count[b]);
  }
  if (centers.size() < 2) {
    // Compact blob: use its principal axis through the centroid.
    Point mean;
    for (std::size_t i = 0; i < grid.size(); ++i) mean = mean + grid.pixel(i).center();
    mean = mean / static_cast<double>(grid.size());
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Point d = grid.pixel(i).center() - mean;
      sxx += d.x * d.x, sxy += d.x * d.y, syy += d.y * d.y;
    }
    const double angle = 0.5 * std::atan2(2 * sxy, sxx - syy);
    const Point u = direction(angle);
    double lo = 0, hi = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double s = dot(grid.pixel(i).center() - mean, u);
      lo = std::min(lo, s), hi = std::max(hi, s);
    }
    centers = {mean + u * lo, mean + u * hi};
    if (hi - lo < 1e-9) centers[1] = centers[0] + u;
  } else if (centers.size() > 2) {
    std::vector<Point> smooth = centers;
    for (std::size_t i = 1; i + 1 < centers.size(); ++i) {
      smooth[i] = (centers[i - 1] + centers[i] + centers[i + 1]) / 3.0;
    }
    centers = std::move(smooth);
  }

  // Reach the blob ends along the end tangents.
  const auto reach = [&](Point end, Point neighbour, bool at_start) {
    const Point t = unit_or(end - neighbour, Point{1, 0});
    double ext = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const bool near_end = at_start ? along[i] <= 2 * bin : along[i] >= length - 2 * bin;
      if (near_end) ext = std::max(ext, dot(grid.pixel(i).center() - end, t));
    }
    return end + t * (ext + 0.5);
  };
  {
    const std::size_t n = centers.size();
    const Point first = reach(centers.front(), centers[std::min<std::size_t>(2, n - 1)], true);
    const Point last = reach(centers.back(), centers[n - 1 - std::min<std::size_t>(2, n - 1)], false);
    centers.insert(centers.begin(), first);
    centers.push_back(last);
  }
  const Point span = centers.back() - centers.front();
  if (span.x < -1e-9 || (std::abs(span.x) <= 1e-9 && span.y < 0)) {
    std::reverse(centers.begin(), centers.end());
  }

  const auto k = static_cast<std::size_t>(stations_k);
  std::vector<Point> stations = resample_polyline(centers, k);
  const auto window = [&](std::span<const Point> st) {
    const double spacing = polyline_length(st) / static_cast<double>(st.size() - 1);
    return std::max(spacing / 2.0, thickness);
  };
  std::vector<Extent> ext = station_extents(grid, stations, window(stations));

  double scale = 1.0;
  if (cfg.unclip) {
    const double radius = threshold_radius(cfg.region_threshold);
    std::vector<double> heights;
    for (const Extent& e : ext) heights.push_back(e.top + e.bottom);
    const double char_height = median(heights) / (2.0 * radius);
    const double grow = (0.5 - radius) * char_height;
    if (grow > 0.0) {
      const std::size_t n = centers.size();
      centers.front() = centers.front() + unit_or(centers.front() - centers[1], Point{-1, 0}) * grow;
      centers.back() = centers.back() + unit_or(centers.back() - centers[n - 2], Point{1, 0}) * grow;
      stations = resample_polyline(centers, k);
      ext = station_extents(grid, stations, window(stations));
    }
    scale = 0.5 / radius;
  }

  const std::vector<Point> tan = tangents(stations);
  TextPolygon poly;
  for (std::size_t i = 0; i < k; ++i) {
    const Point up{tan[i].y, -tan[i].x};
    poly.top.push_back(stations[i] + up * (ext[i].top * scale));
    poly.bottom.push_back(stations[i] - up * (ext[i].bottom * scale));
  }
  return poly;
}

}  // namespace detail

/// Paired-control-point polygons (K stations each) for every text blob.
inline std::vector<TextPolygon> extract_polygons(const ScoreMap& region, const ScoreMap& link,
                                                 const PostprocConfig& cfg = {}, int k = 10) {
  if (k < 2) throw InvalidArgument("extract_polygons: K must be >= 2");
  const Components comps = detail::detection_components(region, link, cfg);
  std::vector<TextPolygon> out;
  for (const Blob& blob : comps.blobs) {
    if (blob.area() < static_cast<std::size_t>(cfg.min_blob_area)) continue;
    out.push_back(detail::blob_polygon(blob, cfg, k));
  }
  return out;
}

}  // namespace craft
