#pragma once

#include <algorithm>
#include <cmath>

#include "depthfill/errors.hpp"
#include "depthfill/types.hpp"

namespace depthfill::edges {

/// Raw Sobel gradient magnitude with replicate border padding.
/// Gx = [[-1,0,1],[-2,0,2],[-1,0,1]], Gy = Gx transposed.
template <typename T>
Grid<T> sobel_magnitude(const Grid<T>& img) {
  const int h = img.height(), w = img.width();
  if (h < 3 || w < 3)
    raise<ShapeError>("sobel requires at least 3x3, got ", h, "x", w);
  Grid<T> out(h, w);
  auto clamped = [&](int y, int x) -> T {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    return img(y, x);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const T tl = clamped(y - 1, x - 1), tc = clamped(y - 1, x), tr = clamped(y - 1, x + 1);
      const T ml = clamped(y, x - 1), mr = clamped(y, x + 1);
      const T bl = clamped(y + 1, x - 1), bc = clamped(y + 1, x), br = clamped(y + 1, x + 1);
      const T gx = (tr + 2 * mr + br) - (tl + 2 * ml + bl);
      const T gy = (bl + 2 * bc + br) - (tl + 2 * tc + tr);
      out(y, x) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

template <typename T>
Grid<T> sobel_magnitude(const DepthMap<T>& depth) {
  return sobel_magnitude(depth.values);
}

/// Occlusion-boundary strength: Sobel magnitude normalized by a saturation
/// level, clipped to [0, 1].
template <typename T>
BoundaryMap<T> sobel_boundary(const DepthMap<T>& depth, T saturation = T(1)) {
  if (!(saturation > T(0)))
    raise<RangeError>("sobel_boundary saturation must be positive, got ", saturation);
  Grid<T> m = sobel_magnitude(depth.values);
  for (T& v : m.vec()) v = std::min(v / saturation, T(1));
  return BoundaryMap<T>(std::move(m));
}

/// Optional hard-thresholding of a continuous boundary target.
template <typename T>
BoundaryMap<T> binarize(const BoundaryMap<T>& b, T threshold) {
  BoundaryMap<T> out(b.height(), b.width());
  for (std::size_t i = 0; i < b.values.size(); ++i)
    out.values.vec()[i] = b.values.vec()[i] >= threshold ? T(1) : T(0);
  return out;
}

/// Grayscale rendering of sobel_boundary for reports.
template <typename T>
Grid<std::uint8_t> boundary_overlay(const DepthMap<T>& depth, T saturation = T(1)) {
  BoundaryMap<T> b = sobel_boundary(depth, saturation);
  Grid<std::uint8_t> img(b.height(), b.width());
  for (std::size_t i = 0; i < b.values.size(); ++i)
    img.vec()[i] = static_cast<std::uint8_t>(
        std::lround(255.0 * static_cast<double>(b.values.vec()[i])));
  return img;
}

}  // namespace depthfill::edges
