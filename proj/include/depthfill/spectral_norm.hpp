#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "depthfill/errors.hpp"
#include "depthfill/rng.hpp"

namespace depthfill::nn {

inline constexpr double kSigmaFloor = 1e-12;

/// Power-iteration state for estimating the largest singular value of a
/// weight tensor matricized to (out_ch) x (in_ch * k * k). The left/right
/// vectors persist across forward passes (warm start); within a training step
/// they are treated as constants.
template <typename T>
struct SpectralNorm {
  std::vector<T> u;  // rows
  std::vector<T> v;  // cols

  void init(int rows, int cols, Rng& rng) {
    u.resize(rows);
    v.resize(cols);
    for (T& x : u) x = static_cast<T>(rng.normal());
    for (T& x : v) x = static_cast<T>(rng.normal());
    normalize(u);
    normalize(v);
  }

  /// Runs `iterations` of v <- normalize(W^T u), u <- normalize(W v).
  void update(const T* w, int rows, int cols, int iterations) {
    using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        wm(w, rows, cols);
    Eigen::Map<Vec> um(u.data(), rows);
    Eigen::Map<Vec> vm(v.data(), cols);
    for (int i = 0; i < iterations; ++i) {
      Vec vt = wm.transpose() * um;
      T n = vt.norm();
      if (n > T(kSigmaFloor)) vm = vt / n;
      Vec ut = wm * vm;
      n = ut.norm();
      if (n > T(kSigmaFloor)) um = ut / n;
    }
  }

  /// sigma = u^T W v with the current (frozen) vectors.
  T sigma(const T* w, int rows, int cols) const {
    using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        wm(w, rows, cols);
    Eigen::Map<const Vec> um(u.data(), rows);
    Eigen::Map<const Vec> vm(v.data(), cols);
    return um.dot(wm * vm);
  }

 private:
  static void normalize(std::vector<T>& x) {
    double n = 0;
    for (T a : x) n += static_cast<double>(a) * a;
    n = std::sqrt(n);
    if (n > kSigmaFloor)
      for (T& a : x) a = static_cast<T>(a / n);
    else if (!x.empty())
      x[0] = T(1);
  }
};

/// Returns weights / sigma_hat. The divisor is clamped below at 1e-12, so an
/// all-zero tensor passes through unchanged.
template <typename T>
std::vector<T> spectral_normalize(const std::vector<T>& w, int rows, int cols,
                                  int iterations, SpectralNorm<T>& state) {
  if (iterations < 1) raise<RangeError>("spectral_normalize: iterations >= 1 required");
  state.update(w.data(), rows, cols, iterations);
  const T s = std::max(state.sigma(w.data(), rows, cols), T(kSigmaFloor));
  std::vector<T> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] / s;
  return out;
}

/// Chain rule through W_n = W / (u^T W v) with u, v held constant:
/// gW += (gWn - <gWn, Wn> u v^T) / sigma.
template <typename T>
void spectral_norm_backward(const std::vector<T>& g_wn, const std::vector<T>& wn,
                            const SpectralNorm<T>& state, T sigma, T* gw,
                            int rows, int cols) {
  double dot = 0;
  for (std::size_t i = 0; i < g_wn.size(); ++i)
    dot += static_cast<double>(g_wn[i]) * static_cast<double>(wn[i]);
  const T d = static_cast<T>(dot);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cols + c;
      gw[i] += (g_wn[i] - d * state.u[r] * state.v[c]) / sigma;
    }
}

}  // namespace depthfill::nn
