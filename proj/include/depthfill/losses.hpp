#pragma once

#include <cmath>
#include <string>

#include "depthfill/errors.hpp"
#include "depthfill/ssim.hpp"
#include "depthfill/types.hpp"

namespace depthfill::losses {

/// Weights of the total objective
///   L = L_SA - lambda_s * L_S + lambda_bc * L_BC + lambda_n * L_N + lambda_b * L_B
/// plus the SSIM hyperparameters. The SSIM term enters with a minus sign, so
/// minimizing the total maximizes structural similarity.
struct LossWeights {
  double lambda_s = 0.1;
  double lambda_bc = 1.0;
  double lambda_n = 0.5;
  double lambda_b = 0.5;
  int ssim_window = 7;
  double depth_norm_max = 16.0;  // meters mapped to unit range before SSIM

  void validate() const {
    for (double l : {lambda_s, lambda_bc, lambda_n, lambda_b})
      if (!std::isfinite(l) || l < 0)
        raise<ConfigError>("LossWeights: lambdas must be finite and >= 0");
    if (ssim_window < 3 || ssim_window % 2 == 0)
      raise<ConfigError>("LossWeights: ssim_window must be odd >= 3, got ",
                         ssim_window);
    if (!(depth_norm_max > 0))
      raise<ConfigError>("LossWeights: depth_norm_max must be positive");
  }
};

struct LossReport {
  double l_sa = 0, l_s = 0, l_bc = 0, l_n = 0, l_b = 0;
  double total = 0;
};

namespace detail {
template <typename T>
void require_same_shape(const Grid<T>& a, const Grid<T>& b, const char* where) {
  if (!a.same_shape(b))
    raise<ShapeError>(where, ": shapes differ: ", a.height(), "x", a.width(),
                      " vs ", b.height(), "x", b.width());
}
}  // namespace detail

/// Mean |pred - gt| over pixels observed in gt (gt > 0). When g_pred is given,
/// accumulates scale * d/d pred; unobserved pixels receive exactly zero
/// gradient.
template <typename T>
double masked_l1(const Grid<T>& pred, const Grid<T>& gt,
                 Grid<double>* g_pred = nullptr, double scale = 1.0) {
  detail::require_same_shape(pred, gt, "masked_l1");
  std::size_t count = 0;
  double sum = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!(gt.vec()[i] > T(0))) continue;
    ++count;
    sum += std::abs(static_cast<double>(pred.vec()[i]) -
                    static_cast<double>(gt.vec()[i]));
  }
  if (count == 0)
    raise<EmptyObservationError>("masked_l1: ground truth has no observed pixels");
  if (g_pred) {
    if (g_pred->empty()) *g_pred = Grid<double>(pred.height(), pred.width(), 0.0);
    const double g = scale / static_cast<double>(count);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (!(gt.vec()[i] > T(0))) continue;
      const double d =
          static_cast<double>(pred.vec()[i]) - static_cast<double>(gt.vec()[i]);
      g_pred->vec()[i] += d > 0 ? g : (d < 0 ? -g : 0.0);
    }
  }
  return sum / static_cast<double>(count);
}

template <typename T>
double masked_l1(const DepthMap<T>& pred, const DepthMap<T>& gt,
                 Grid<double>* g_pred = nullptr, double scale = 1.0) {
  return masked_l1(pred.values, gt.values, g_pred, scale);
}

/// Mean SSIM index of the two depth maps after normalizing to [0,1] by
/// depth_norm_max. Higher is better (1 for identical inputs).
template <typename T>
double ssim_loss(const Grid<T>& pred, const Grid<T>& gt, const LossWeights& w,
                 Grid<double>* g_pred = nullptr, double scale = 1.0) {
  detail::require_same_shape(pred, gt, "ssim_loss");
  const double inv = 1.0 / w.depth_norm_max;
  Grid<T> xn(pred.height(), pred.width()), yn(gt.height(), gt.width());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    xn.vec()[i] = static_cast<T>(pred.vec()[i] * inv);
    yn.vec()[i] = static_cast<T>(gt.vec()[i] * inv);
  }
  SsimOptions opt;
  opt.window = w.ssim_window;
  Grid<double> gx;
  const double value = ssim_index(xn, yn, opt, g_pred ? &gx : nullptr);
  if (g_pred) {
    if (g_pred->empty()) *g_pred = Grid<double>(pred.height(), pred.width(), 0.0);
    for (std::size_t i = 0; i < gx.size(); ++i)
      g_pred->vec()[i] += scale * gx.vec()[i] * inv;
  }
  return value;
}

template <typename T>
double ssim_loss(const DepthMap<T>& pred, const DepthMap<T>& gt,
                 const LossWeights& w, Grid<double>* g_pred = nullptr,
                 double scale = 1.0) {
  return ssim_loss(pred.values, gt.values, w, g_pred, scale);
}

/// Mean squared 3-vector difference over pixels valid in gt.
template <typename T>
double normal_loss(const Tensor<T>& pred, const NormalMap<T>& gt,
                   Tensor<double>* g_pred = nullptr, double scale = 1.0) {
  if (pred.channels() != 3 || pred.height() != gt.height() ||
      pred.width() != gt.width())
    raise<ShapeError>("normal_loss: prediction shape mismatch");
  std::size_t count = 0;
  double sum = 0;
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      if (!gt.validity(y, x)) continue;
      ++count;
      for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(pred(c, y, x)) -
                         static_cast<double>(gt.values(c, y, x));
        sum += d * d;
      }
    }
  if (count == 0)
    raise<EmptyObservationError>("normal_loss: no valid ground-truth normals");
  if (g_pred) {
    if (g_pred->empty()) *g_pred = Tensor<double>(3, gt.height(), gt.width(), 0.0);
    const double g = 2.0 * scale / static_cast<double>(count);
    for (int y = 0; y < gt.height(); ++y)
      for (int x = 0; x < gt.width(); ++x) {
        if (!gt.validity(y, x)) continue;
        for (int c = 0; c < 3; ++c)
          (*g_pred)(c, y, x) += g * (static_cast<double>(pred(c, y, x)) -
                                     static_cast<double>(gt.values(c, y, x)));
      }
  }
  return sum / static_cast<double>(count);
}

/// Mean squared scalar difference over all pixels (boundary head target).
template <typename T>
double boundary_rep_loss(const Grid<T>& pred, const Grid<T>& gt,
                         Grid<double>* g_pred = nullptr, double scale = 1.0) {
  detail::require_same_shape(pred, gt, "boundary_rep_loss");
  double sum = 0;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d =
        static_cast<double>(pred.vec()[i]) - static_cast<double>(gt.vec()[i]);
    sum += d * d;
  }
  if (g_pred) {
    if (g_pred->empty()) *g_pred = Grid<double>(pred.height(), pred.width(), 0.0);
    const double g = 2.0 * scale / n;
    for (std::size_t i = 0; i < pred.size(); ++i)
      g_pred->vec()[i] += g * (static_cast<double>(pred.vec()[i]) -
                               static_cast<double>(gt.vec()[i]));
  }
  return sum / n;
}

/// Mean absolute difference over all pixels.
template <typename T>
double boundary_consistency_loss(const Grid<T>& pred, const Grid<T>& gt,
                                 Grid<double>* g_pred = nullptr,
                                 double scale = 1.0) {
  detail::require_same_shape(pred, gt, "boundary_consistency_loss");
  double sum = 0;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    sum += std::abs(static_cast<double>(pred.vec()[i]) -
                    static_cast<double>(gt.vec()[i]));
  if (g_pred) {
    if (g_pred->empty()) *g_pred = Grid<double>(pred.height(), pred.width(), 0.0);
    const double g = scale / n;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d =
          static_cast<double>(pred.vec()[i]) - static_cast<double>(gt.vec()[i]);
      g_pred->vec()[i] += d > 0 ? g : (d < 0 ? -g : 0.0);
    }
  }
  return sum / n;
}

/// Combines the terms; the SSIM term is subtracted.
inline LossReport total_loss(double l_sa, double l_s, double l_bc, double l_n,
                             double l_b, const LossWeights& w) {
  auto check = [](double v, const char* term) {
    if (!std::isfinite(v)) raise<NonFiniteError>("loss term ", term, " is ", v);
  };
  check(l_sa, "l_sa");
  check(l_s, "l_s");
  check(l_bc, "l_bc");
  check(l_n, "l_n");
  check(l_b, "l_b");
  LossReport r;
  r.l_sa = l_sa;
  r.l_s = l_s;
  r.l_bc = l_bc;
  r.l_n = l_n;
  r.l_b = l_b;
  r.total = l_sa - w.lambda_s * l_s + w.lambda_bc * l_bc + w.lambda_n * l_n +
            w.lambda_b * l_b;
  return r;
}

}  // namespace depthfill::losses
