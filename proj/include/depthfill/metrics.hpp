#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "depthfill/errors.hpp"
#include "depthfill/losses.hpp"
#include "depthfill/types.hpp"

namespace depthfill::metrics {

inline constexpr std::array<double, 5> kDeltaThresholds = {1.05, 1.10, 1.25,
                                                           1.5625, 1.953125};

struct MetricsReport {
  double rmse = 0;
  double mean = 0;
  double ssim = 0;
  std::array<double, 5> delta = {0, 0, 0, 0, 0};
  std::int64_t pixel_count = 0;  // observed pixels
};

namespace detail {
template <typename T>
std::size_t require_observed(const Grid<T>& pred, const Grid<T>& gt,
                             const char* where) {
  if (!pred.same_shape(gt))
    raise<ShapeError>(where, ": shapes differ: ", pred.height(), "x", pred.width(),
                      " vs ", gt.height(), "x", gt.width());
  std::size_t count = 0;
  for (const T& v : gt.vec())
    if (v > T(0)) ++count;
  if (count == 0)
    raise<EmptyObservationError>(where, ": ground truth has no observed pixels");
  return count;
}
}  // namespace detail

template <typename T>
double rmse(const DepthMap<T>& pred, const DepthMap<T>& gt) {
  const std::size_t n = detail::require_observed(pred.values, gt.values, "rmse");
  double sum = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!(gt.values.vec()[i] > T(0))) continue;
    const double d = static_cast<double>(pred.values.vec()[i]) -
                     static_cast<double>(gt.values.vec()[i]);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

template <typename T>
double mean_error(const DepthMap<T>& pred, const DepthMap<T>& gt) {
  const std::size_t n = detail::require_observed(pred.values, gt.values, "mean_error");
  double sum = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (!(gt.values.vec()[i] > T(0))) continue;
    sum += std::abs(static_cast<double>(pred.values.vec()[i]) -
                    static_cast<double>(gt.values.vec()[i]));
  }
  return sum / static_cast<double>(n);
}

/// Same computation as losses::ssim_loss (single implementation behind both).
template <typename T>
double ssim_metric(const DepthMap<T>& pred, const DepthMap<T>& gt,
                   const losses::LossWeights& w = {}) {
  return losses::ssim_loss(pred, gt, w);
}

/// Fraction of observed pixels with max(pred/gt, gt/pred) < t.
template <typename T>
double delta_metric(const DepthMap<T>& pred, const DepthMap<T>& gt, double t) {
  if (!(t > 1.0)) raise<RangeError>("delta_metric: threshold must exceed 1, got ", t);
  const std::size_t n =
      detail::require_observed(pred.values, gt.values, "delta_metric");
  std::size_t within = 0;
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    const double g = static_cast<double>(gt.values.vec()[i]);
    if (!(g > 0)) continue;
    const double p = static_cast<double>(pred.values.vec()[i]);
    if (!(p > 0))
      raise<RangeError>("delta_metric: prediction ", p,
                        " at an observed pixel; ratio undefined");
    if (std::max(p / g, g / p) < t) ++within;
  }
  return static_cast<double>(within) / static_cast<double>(n);
}

template <typename T>
MetricsReport evaluate(const DepthMap<T>& pred, const DepthMap<T>& gt,
                       const losses::LossWeights& w = {}) {
  MetricsReport r;
  r.rmse = rmse(pred, gt);
  r.mean = mean_error(pred, gt);
  r.ssim = ssim_metric(pred, gt, w);
  for (std::size_t i = 0; i < kDeltaThresholds.size(); ++i)
    r.delta[i] = delta_metric(pred, gt, kDeltaThresholds[i]);
  r.pixel_count = 0;
  for (const T& v : gt.values.vec())
    if (v > T(0)) ++r.pixel_count;
  return r;
}

/// Dataset-level aggregation: unweighted mean of per-image metrics;
/// pixel_count sums.
inline MetricsReport aggregate(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) raise<EmptyObservationError>("aggregate: no reports");
  MetricsReport agg;
  for (const MetricsReport& r : reports) {
    agg.rmse += r.rmse;
    agg.mean += r.mean;
    agg.ssim += r.ssim;
    for (std::size_t i = 0; i < agg.delta.size(); ++i) agg.delta[i] += r.delta[i];
    agg.pixel_count += r.pixel_count;
  }
  const double n = static_cast<double>(reports.size());
  agg.rmse /= n;
  agg.mean /= n;
  agg.ssim /= n;
  for (double& d : agg.delta) d /= n;
  return agg;
}

inline const std::array<const char*, 5>& delta_labels() {
  static const std::array<const char*, 5> labels = {"1.05", "1.10", "1.25",
                                                    "1.25^2", "1.25^3"};
  return labels;
}

/// Flat key-value serialization, one metric per line.
inline std::string to_flat_text(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(9);
  os << "rmse " << r.rmse << "\n"
     << "mean " << r.mean << "\n"
     << "ssim " << r.ssim << "\n";
  for (std::size_t i = 0; i < r.delta.size(); ++i)
    os << "delta_" << delta_labels()[i] << " " << r.delta[i] << "\n";
  os << "pixel_count " << r.pixel_count << "\n";
  return os.str();
}

}  // namespace depthfill::metrics
