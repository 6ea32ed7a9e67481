#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "depthfill/errors.hpp"

namespace depthfill {

/// Dense H x W grid, row-major.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T(0))
      : h_(height), w_(width), data_(static_cast<std::size_t>(height) * width, fill) {
    assert(height >= 0 && width >= 0);
  }

  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int y, int x) {
    assert(y >= 0 && y < h_ && x >= 0 && x < w_);
    return data_[static_cast<std::size_t>(y) * w_ + x];
  }
  const T& operator()(int y, int x) const {
    assert(y >= 0 && y < h_ && x >= 0 && x < w_);
    return data_[static_cast<std::size_t>(y) * w_ + x];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  void fill(T v) { data_.assign(data_.size(), v); }
  bool same_shape(const Grid& o) const { return h_ == o.h_ && w_ == o.w_; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.h_ == b.h_ && a.w_ == b.w_ && a.data_ == b.data_;
  }

 private:
  int h_ = 0;
  int w_ = 0;
  std::vector<T> data_;
};

/// Dense C x H x W tensor, channel-major then row-major. This is the only
/// activation container used by the network code; Eigen maps onto it for the
/// matrix products.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width, T fill = T(0))
      : c_(channels),
        h_(height),
        w_(width),
        data_(static_cast<std::size_t>(channels) * height * width, fill) {
    assert(channels >= 0 && height >= 0 && width >= 0);
  }

  int channels() const { return c_; }
  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h_) * w_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int c, int y, int x) {
    assert(c >= 0 && c < c_ && y >= 0 && y < h_ && x >= 0 && x < w_);
    return data_[(static_cast<std::size_t>(c) * h_ + y) * w_ + x];
  }
  const T& operator()(int c, int y, int x) const {
    assert(c >= 0 && c < c_ && y >= 0 && y < h_ && x >= 0 && x < w_);
    return data_[(static_cast<std::size_t>(c) * h_ + y) * w_ + x];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* channel(int c) { return data_.data() + static_cast<std::size_t>(c) * plane(); }
  const T* channel(int c) const {
    return data_.data() + static_cast<std::size_t>(c) * plane();
  }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  void fill(T v) { data_.assign(data_.size(), v); }
  bool same_shape(const Tensor& o) const {
    return c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.c_ == b.c_ && a.h_ == b.h_ && a.w_ == b.w_ && a.data_ == b.data_;
  }

 private:
  int c_ = 0;
  int h_ = 0;
  int w_ = 0;
  std::vector<T> data_;
};

template <typename T>
bool all_finite(const std::vector<T>& v) {
  for (const T& x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

template <typename T>
Grid<T> extract_channel(const Tensor<T>& t, int c) {
  Grid<T> g(t.height(), t.width());
  const T* src = t.channel(c);
  std::copy(src, src + t.plane(), g.data());
  return g;
}

}  // namespace depthfill
