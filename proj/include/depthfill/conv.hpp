#pragma once

#include <Eigen/Core>

#include <vector>

#include "depthfill/errors.hpp"
#include "depthfill/tensor.hpp"

namespace depthfill::nn {

/// 2-D convolution geometry. Same-padding at stride 1 (odd kernels); stride-2
/// halves even extents.
struct ConvSpec {
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 3;
  int stride = 1;
  int dilation = 1;

  int pad() const { return dilation * (kernel - 1) / 2; }
  int out_extent(int n) const {
    return (n + 2 * pad() - dilation * (kernel - 1) - 1) / stride + 1;
  }
  int weight_rows() const { return out_ch; }
  int weight_cols() const { return in_ch * kernel * kernel; }
};

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Patch matrix: row (c*k+ky)*k+kx, column oy*Wout+ox; zeros outside the input.
template <typename T>
void im2col(const Tensor<T>& x, const ConvSpec& s, std::vector<T>& cols) {
  const int hin = x.height(), win = x.width();
  const int hout = s.out_extent(hin), wout = s.out_extent(win);
  const int p = s.pad();
  const std::size_t positions = static_cast<std::size_t>(hout) * wout;
  cols.assign(static_cast<std::size_t>(s.weight_cols()) * positions, T(0));
  T* dst = cols.data();
  for (int c = 0; c < s.in_ch; ++c) {
    const T* plane = x.channel(c);
    for (int ky = 0; ky < s.kernel; ++ky) {
      for (int kx = 0; kx < s.kernel; ++kx) {
        for (int oy = 0; oy < hout; ++oy) {
          const int iy = oy * s.stride - p + ky * s.dilation;
          if (iy < 0 || iy >= hin) {
            dst += wout;
            continue;
          }
          const T* src_row = plane + static_cast<std::size_t>(iy) * win;
          for (int ox = 0; ox < wout; ++ox) {
            const int ix = ox * s.stride - p + kx * s.dilation;
            dst[ox] = (ix >= 0 && ix < win) ? src_row[ix] : T(0);
          }
          dst += wout;
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch-matrix gradients back onto the input.
template <typename T>
void col2im(const std::vector<T>& cols, const ConvSpec& s, Tensor<T>& gx) {
  const int hin = gx.height(), win = gx.width();
  const int hout = s.out_extent(hin), wout = s.out_extent(win);
  const int p = s.pad();
  const T* src = cols.data();
  for (int c = 0; c < s.in_ch; ++c) {
    T* plane = gx.channel(c);
    for (int ky = 0; ky < s.kernel; ++ky) {
      for (int kx = 0; kx < s.kernel; ++kx) {
        for (int oy = 0; oy < hout; ++oy) {
          const int iy = oy * s.stride - p + ky * s.dilation;
          if (iy < 0 || iy >= hin) {
            src += wout;
            continue;
          }
          T* dst_row = plane + static_cast<std::size_t>(iy) * win;
          for (int ox = 0; ox < wout; ++ox) {
            const int ix = ox * s.stride - p + kx * s.dilation;
            if (ix >= 0 && ix < win) dst_row[ix] += src[ox];
          }
          src += wout;
        }
      }
    }
  }
}

}  // namespace detail

/// out(c, p) = sum_r w(c, r) * patches(r, p) + b(c)
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const T* w, const T* b,
                         const ConvSpec& s) {
  if (x.channels() != s.in_ch)
    raise<ShapeError>("conv2d: input has ", x.channels(), " channels, expected ",
                      s.in_ch);
  const int hout = s.out_extent(x.height()), wout = s.out_extent(x.width());
  const std::size_t positions = static_cast<std::size_t>(hout) * wout;
  std::vector<T> cols;
  detail::im2col(x, s, cols);
  Tensor<T> out(s.out_ch, hout, wout);
  Eigen::Map<const detail::RowMat<T>> wm(w, s.weight_rows(), s.weight_cols());
  Eigen::Map<const detail::RowMat<T>> cm(cols.data(), s.weight_cols(),
                                         static_cast<Eigen::Index>(positions));
  Eigen::Map<detail::RowMat<T>> om(out.data(), s.out_ch,
                                   static_cast<Eigen::Index>(positions));
  om.noalias() = wm * cm;
  if (b)
    for (int c = 0; c < s.out_ch; ++c) om.row(c).array() += b[c];
  return out;
}

/// Accumulates weight/bias gradients (+=) and, when gx is non-null, writes the
/// input gradient.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const T* w, const ConvSpec& s,
                     const Tensor<T>& gout, T* gw, T* gb, Tensor<T>* gx) {
  const int hout = s.out_extent(x.height()), wout = s.out_extent(x.width());
  const std::size_t positions = static_cast<std::size_t>(hout) * wout;
  Eigen::Map<const detail::RowMat<T>> gom(gout.data(), s.out_ch,
                                          static_cast<Eigen::Index>(positions));
  if (gb) {
    for (int c = 0; c < s.out_ch; ++c) gb[c] += gom.row(c).sum();
  }
  if (gw) {
    std::vector<T> cols;
    detail::im2col(x, s, cols);
    Eigen::Map<const detail::RowMat<T>> cm(cols.data(), s.weight_cols(),
                                           static_cast<Eigen::Index>(positions));
    Eigen::Map<detail::RowMat<T>> gwm(gw, s.weight_rows(), s.weight_cols());
    gwm.noalias() += gom * cm.transpose();
  }
  if (gx) {
    *gx = Tensor<T>(s.in_ch, x.height(), x.width());
    std::vector<T> gcols(static_cast<std::size_t>(s.weight_cols()) * positions);
    Eigen::Map<const detail::RowMat<T>> wm(w, s.weight_rows(), s.weight_cols());
    Eigen::Map<detail::RowMat<T>> gcm(gcols.data(), s.weight_cols(),
                                      static_cast<Eigen::Index>(positions));
    gcm.noalias() = wm.transpose() * gom;
    detail::col2im(gcols, s, *gx);
  }
}

}  // namespace depthfill::nn
