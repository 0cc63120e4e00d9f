#pragma once

// Detection and recognition losses as functionals over maps, each returning
// its value together with the gradient with respect to the prediction.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "craft/error.hpp"
#include "craft/rastermap.hpp"

namespace craft {

struct LossConfig {
  double lambda_theta = 0.1;        ///< weight of the orientation term
  double ohem_neg_pos_ratio = 3.0;  ///< hard negatives kept per positive
  double positive_threshold = 0.1;  ///< gt > threshold marks a positive pixel

  void validate() const {
    if (!(lambda_theta >= 0.0)) throw InvalidArgument("LossConfig: lambda_theta must be >= 0");
    if (!(ohem_neg_pos_ratio > 0.0)) throw InvalidArgument("LossConfig: ratio must be > 0");
  }
};

template <class T>
struct LossResult {
  double value = 0.0;
  Map<T> grad;
};

template <class T>
struct OrientationLossResult {
  double value = 0.0;
  Map<T> grad_sin;
  Map<T> grad_cos;
};

// ---------------------------------------------------------------------------
// Region / link loss with online hard example mining

/// Pixels taking part in the region/link loss: every positive plus the
/// ceil(ratio * |positives|) negatives with the largest squared error.
/// Ties between equally hard negatives go to the lower pixel index.
template <class T>
BinaryMap ohem_selection(const Map<T>& pred, const Map<T>& gt, const LossConfig& cfg = {}) {
  cfg.validate();
  if (pred.shape() != gt.shape()) throw InvalidArgument("ohem_selection: shape mismatch");
  if (pred.empty()) throw EmptySelection("ohem_selection: map has no pixels");
  BinaryMap mask(pred.shape());
  std::vector<std::size_t> negatives;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] > cfg.positive_threshold) {
      mask[i] = 1;
      ++positives;
    } else {
      negatives.push_back(i);
    }
  }
  const double wanted = std::ceil(cfg.ohem_neg_pos_ratio * static_cast<double>(positives));
  const std::size_t k = std::min(negatives.size(), static_cast<std::size_t>(wanted));
  const auto sq = [&](std::size_t i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
    return d * d;
  };
  std::partial_sort(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(k),
                    negatives.end(), [&](std::size_t a, std::size_t b) {
                      const double ea = sq(a), eb = sq(b);
                      return ea > eb || (ea == eb && a < b);
                    });
  for (std::size_t j = 0; j < k; ++j) mask[negatives[j]] = 1;
  return mask;
}

/// Mean squared error over a fixed selection mask. An empty selection gives
/// a value of 0 and a zero gradient.
template <class T>
LossResult<T> masked_mse(const Map<T>& pred, const Map<T>& gt, const BinaryMap& mask) {
  if (pred.shape() != gt.shape() || mask.shape() != pred.shape()) {
    throw InvalidArgument("masked_mse: shape mismatch");
  }
  LossResult<T> out{0.0, Map<T>(pred.shape())};
  const auto selected = static_cast<std::size_t>(
      std::count_if(mask.values().begin(), mask.values().end(), [](auto b) { return b != 0; }));
  if (selected == 0) return out;
  const double inv = 1.0 / static_cast<double>(selected);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double d = static_cast<double>(pred[i]) - static_cast<double>(gt[i]);
    acc += d * d;
    out.grad[i] = static_cast<T>(2.0 * d * inv);
  }
  out.value = acc * inv;
  return out;
}

template <class T>
LossResult<T> region_link_loss(const Map<T>& pred, const Map<T>& gt, const LossConfig& cfg = {}) {
  return masked_mse(pred, gt, ohem_selection(pred, gt, cfg));
}

// ---------------------------------------------------------------------------
// Orientation loss

inline constexpr double kOrientationEpsilon = 1e-8;

/// Region-weighted squared error of both orientation channels, normalized by
/// the total region weight.
template <class T>
OrientationLossResult<T> orientation_loss(const Map<T>& pred_sin, const Map<T>& pred_cos,
                                          const Map<T>& gt_sin, const Map<T>& gt_cos,
                                          const Map<T>& region_gt) {
  const Shape s = region_gt.shape();
  if (pred_sin.shape() != s || pred_cos.shape() != s || gt_sin.shape() != s ||
      gt_cos.shape() != s) {
    throw InvalidArgument("orientation_loss: shape mismatch");
  }
  OrientationLossResult<T> out{0.0, Map<T>(s), Map<T>(s)};
  double weight = 0.0;
  for (std::size_t i = 0; i < region_gt.size(); ++i) weight += static_cast<double>(region_gt[i]);
  const double norm = std::max(weight, kOrientationEpsilon);
  double acc = 0.0;
  for (std::size_t i = 0; i < region_gt.size(); ++i) {
    const double w = static_cast<double>(region_gt[i]);
    const double ds = static_cast<double>(pred_sin[i]) - static_cast<double>(gt_sin[i]);
    const double dc = static_cast<double>(pred_cos[i]) - static_cast<double>(gt_cos[i]);
    acc += w * (ds * ds + dc * dc);
    out.grad_sin[i] = static_cast<T>(2.0 * w * ds / norm);
    out.grad_cos[i] = static_cast<T>(2.0 * w * dc / norm);
  }
  out.value = acc / norm;
  return out;
}

inline double detection_loss(double region_loss, double link_loss, double orientation,
                             const LossConfig& cfg = {}) {
  return region_loss + link_loss + cfg.lambda_theta * orientation;
}

// ---------------------------------------------------------------------------
// Recognition loss

/// Per-step probabilities of one decoded word; their product is the
/// sequence probability.
using ProbSequence = std::vector<double>;

/// Negative log-likelihood summed over sequences and steps.
inline double recognition_loss(std::span<const ProbSequence> seqs) {
  double acc = 0.0;
  for (const ProbSequence& seq : seqs) {
    for (double p : seq) {
      if (!(p > 0.0 && p <= 1.0)) throw DomainError("recognition_loss: probability outside (0, 1]");
      acc -= std::log(p);
    }
  }
  return acc;
}

/// Gradient of recognition_loss with respect to each step probability.
inline std::vector<ProbSequence> recognition_loss_grad(std::span<const ProbSequence> seqs) {
  std::vector<ProbSequence> grad;
  grad.reserve(seqs.size());
  for (const ProbSequence& seq : seqs) {
    ProbSequence g(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (!(seq[t] > 0.0 && seq[t] <= 1.0)) {
        throw DomainError("recognition_loss: probability outside (0, 1]");
      }
      g[t] = -1.0 / seq[t];
    }
    grad.push_back(std::move(g));
  }
  return grad;
}

/// Recognition loss over a map of step log-probabilities (one sequence per
/// row). The gradient with respect to each log-probability is -1.
template <class T>
LossResult<T> recognition_loss_log(const Map<T>& log_probs) {
  LossResult<T> out{0.0, Map<T>(log_probs.shape(), T{-1})};
  for (std::size_t i = 0; i < log_probs.size(); ++i) {
    const double lp = static_cast<double>(log_probs[i]);
    if (!(lp <= 0.0)) throw DomainError("recognition_loss: log-probability must be <= 0");
    out.value -= lp;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient checking

/// A scalar functional of one map that also reports its analytic gradient.
using MapFunctional = std::function<LossResult<double>(const Map<double>&)>;

/// Largest relative error between the analytic gradient and central
/// differences, with denominator max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const MapFunctional& loss, const Map<double>& point, double step) {
  if (!(step > 0.0)) throw InvalidArgument("grad_check: step must be > 0");
  const Map<double> analytic = loss(point).grad;
  if (analytic.shape() != point.shape()) throw InvalidArgument("grad_check: gradient shape mismatch");
  Map<double> probe = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double x = point[i];
    probe[i] = x + step;
    const double plus = loss(probe).value;
    probe[i] = x - step;
    const double minus = loss(probe).value;
    probe[i] = x;
    const double numeric = (plus - minus) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace craft
