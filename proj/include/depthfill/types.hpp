#pragma once

#include <cmath>
#include <string>

#include "depthfill/errors.hpp"
#include "depthfill/tensor.hpp"

namespace depthfill {

using Mask = Grid<std::uint8_t>;

/// Depth in meters. 0 encodes "missing / unobserved"; any positive value is a
/// valid measurement.
template <typename T>
struct DepthMap {
  Grid<T> values;

  DepthMap() = default;
  explicit DepthMap(Grid<T> g) : values(std::move(g)) {}
  DepthMap(int h, int w, T fill = T(0)) : values(h, w, fill) {}

  int height() const { return values.height(); }
  int width() const { return values.width(); }
  T& operator()(int y, int x) { return values(y, x); }
  const T& operator()(int y, int x) const { return values(y, x); }

  void validate() const {
    for (const T& v : values.vec()) {
      if (!std::isfinite(static_cast<double>(v)) || v < T(0))
        raise<RangeError>("DepthMap contains non-finite or negative value ", v);
    }
  }
};

template <typename T>
Mask validity_mask(const DepthMap<T>& depth) {
  Mask m(depth.height(), depth.width(), 0);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.vec()[i] = depth.values.vec()[i] > T(0) ? 1 : 0;
  return m;
}

/// 3 x H x W image with channels in [0, 1].
template <typename T>
struct RgbImage {
  Tensor<T> values;

  RgbImage() = default;
  explicit RgbImage(Tensor<T> t) : values(std::move(t)) {}
  RgbImage(int h, int w, T fill = T(0)) : values(3, h, w, fill) {}

  int height() const { return values.height(); }
  int width() const { return values.width(); }

  void validate() const {
    if (values.channels() != 3)
      raise<ShapeError>("RgbImage requires 3 channels, got ", values.channels());
    for (const T& v : values.vec()) {
      if (!std::isfinite(static_cast<double>(v)) || v < T(0) || v > T(1))
        raise<RangeError>("RgbImage value outside [0,1]: ", v);
    }
  }
};

/// Unit surface normals (camera frame: x right, y down, z forward) with a
/// per-pixel validity flag.
template <typename T>
struct NormalMap {
  Tensor<T> values;  // 3 x H x W
  Mask validity;

  NormalMap() = default;
  NormalMap(int h, int w) : values(3, h, w, T(0)), validity(h, w, 0) {}

  int height() const { return values.height(); }
  int width() const { return values.width(); }

  void validate(double tol = 1e-4) const {
    for (int y = 0; y < height(); ++y)
      for (int x = 0; x < width(); ++x) {
        if (!validity(y, x)) continue;
        const double nx = values(0, y, x), ny = values(1, y, x), nz = values(2, y, x);
        const double n = std::sqrt(nx * nx + ny * ny + nz * nz);
        if (!std::isfinite(n) || std::abs(n - 1.0) > tol)
          raise<RangeError>("NormalMap norm ", n, " at (", y, ",", x,
                            ") outside 1 +/- ", tol);
      }
  }
};

/// Occlusion-boundary strength in [0, 1].
template <typename T>
struct BoundaryMap {
  Grid<T> values;

  BoundaryMap() = default;
  explicit BoundaryMap(Grid<T> g) : values(std::move(g)) {}
  BoundaryMap(int h, int w, T fill = T(0)) : values(h, w, fill) {}

  int height() const { return values.height(); }
  int width() const { return values.width(); }
  T& operator()(int y, int x) { return values(y, x); }
  const T& operator()(int y, int x) const { return values(y, x); }

  void validate() const {
    for (const T& v : values.vec())
      if (!std::isfinite(static_cast<double>(v)) || v < T(0) || v > T(1))
        raise<RangeError>("BoundaryMap value outside [0,1]: ", v);
  }
};

/// Pinhole camera. Pixel (x, y) with depth z unprojects to
/// ((x-cx)/fx*z, (y-cy)/fy*z, z).
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;

  void validate(int width, int height) const {
    if (!(fx > 0) || !(fy > 0))
      raise<RangeError>("CameraIntrinsics: focal lengths must be positive (fx=",
                        fx, ", fy=", fy, ")");
    if (!(cx > 0 && cx < width) || !(cy > 0 && cy < height))
      raise<RangeError>("CameraIntrinsics: principal point (", cx, ",", cy,
                        ") outside image ", width, "x", height);
  }

  static CameraIntrinsics defaulted(int width, int height) {
    CameraIntrinsics k;
    k.fx = k.fy = 0.5 * width;
    k.cx = 0.5 * width;
    k.cy = 0.5 * height;
    return k;
  }
};

/// One training/testing view: RGB, holed sensor depth, complete ground-truth
/// depth, plus ground-truth normals and boundary derived from it.
template <typename T>
struct Sample {
  RgbImage<T> rgb;
  DepthMap<T> raw_depth;
  DepthMap<T> gt_depth;
  NormalMap<T> gt_normals;
  BoundaryMap<T> gt_boundary;
  std::string id;

  int height() const { return gt_depth.height(); }
  int width() const { return gt_depth.width(); }

  void validate() const {
    const int h = height(), w = width();
    auto check = [&](int oh, int ow, const char* what) {
      if (oh != h || ow != w)
        raise<ShapeError>("Sample '", id, "': ", what, " is ", oh, "x", ow,
                          " but gt_depth is ", h, "x", w);
    };
    check(rgb.height(), rgb.width(), "rgb");
    check(raw_depth.height(), raw_depth.width(), "raw_depth");
    check(gt_normals.height(), gt_normals.width(), "gt_normals");
    check(gt_boundary.height(), gt_boundary.width(), "gt_boundary");
    rgb.validate();
    raw_depth.validate();
    gt_depth.validate();
    gt_normals.validate();
    gt_boundary.validate();
    for (std::size_t i = 0; i < raw_depth.values.size(); ++i)
      if (raw_depth.values.vec()[i] > T(0) && !(gt_depth.values.vec()[i] > T(0)))
        raise<RangeError>("Sample '", id,
                          "': raw_depth valid where gt_depth is missing");
  }
};

}  // namespace depthfill
