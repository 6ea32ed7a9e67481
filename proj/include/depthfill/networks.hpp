#pragma once

#include <optional>
#include <string>
#include <vector>

#include "depthfill/blocks.hpp"
#include "depthfill/errors.hpp"
#include "depthfill/types.hpp"

namespace depthfill::nn {

struct NetworkConfig {
  int base_channels = 32;
  int depth_levels = 3;
  int input_channels = 0;   // set per network
  int output_channels = 0;  // set per network

  void validate() const {
    if (base_channels < 1 || depth_levels < 1)
      raise<ConfigError>("NetworkConfig: base_channels and depth_levels must be >= 1");
    if (base_channels * (1 << (depth_levels - 1)) > 512)
      raise<ConfigError>("NetworkConfig: base_channels * 2^(depth_levels-1) = ",
                         base_channels * (1 << (depth_levels - 1)),
                         " exceeds 512");
  }
};

template <typename T>
struct TrunkCache {
  ConvBlockCache<T> stem;
  std::vector<ConvBlockCache<T>> downs;
  ConvBlockCache<T> mid;
  std::vector<ConvBlockCache<T>> decs;
  std::vector<Tensor<T>> enc_out;  // per level
};

/// Shared encoder-decoder skeleton: a stem block, stride-2 encoder blocks, a
/// bottleneck block, and nearest-neighbor-upsample + block decoder stages with
/// skip concatenation. Emits base_channels features at input resolution.
template <typename T>
class Trunk {
 public:
  void configure(const std::string& prefix, int in_ch, const NetworkConfig& cfg,
                 bool gated, Activation phi) {
    cfg.validate();
    prefix_ = prefix;
    base_ = cfg.base_channels;
    levels_ = cfg.depth_levels;
    gated_ = gated;
    auto ch = [&](int level) { return base_ * (1 << level); };
    stem_.configure(prefix + ".stem", ConvSpec{in_ch, ch(0), 3, 1, 1}, gated, phi);
    downs_.resize(levels_ - 1);
    for (int l = 1; l < levels_; ++l)
      downs_[l - 1].configure(strcat_(prefix, ".down", l),
                              ConvSpec{ch(l - 1), ch(l), 3, 2, 1}, gated, phi);
    mid_.configure(prefix + ".mid",
                   ConvSpec{ch(levels_ - 1), ch(levels_ - 1), 3, 1, 1}, gated, phi);
    decs_.resize(levels_ - 1);
    for (int l = levels_ - 2; l >= 0; --l)
      decs_[levels_ - 2 - l].configure(strcat_(prefix, ".dec", l),
                                       ConvSpec{ch(l + 1) + ch(l), ch(l), 3, 1, 1},
                                       gated, phi);
  }

  void init_params(Rng& rng) {
    stem_.init_params(rng);
    for (auto& b : downs_) b.init_params(rng);
    mid_.init_params(rng);
    for (auto& b : decs_) b.init_params(rng);
  }

  void collect(ParamRefs<T>& refs) {
    stem_.collect(refs);
    for (auto& b : downs_) b.collect(refs);
    mid_.collect(refs);
    for (auto& b : decs_) b.collect(refs);
  }

  int out_channels() const { return base_; }
  int spatial_multiple() const { return 1 << (levels_ - 1); }
  bool gated() const { return gated_; }

  Tensor<T> forward(const Tensor<T>& x, TrunkCache<T>& c, bool update_sn) const {
    if (x.height() % spatial_multiple() != 0 || x.width() % spatial_multiple() != 0)
      raise<ShapeError>("trunk '", prefix_, "': input ", x.height(), "x",
                        x.width(), " not a multiple of ", spatial_multiple());
    c.downs.resize(downs_.size());
    c.decs.resize(decs_.size());
    c.enc_out.clear();
    c.enc_out.push_back(stem_.forward(x, c.stem, update_sn));
    for (std::size_t i = 0; i < downs_.size(); ++i)
      c.enc_out.push_back(downs_[i].forward(c.enc_out.back(), c.downs[i], update_sn));
    Tensor<T> cur = mid_.forward(c.enc_out.back(), c.mid, update_sn);
    for (std::size_t i = 0; i < decs_.size(); ++i) {
      const int level = levels_ - 2 - static_cast<int>(i);
      Tensor<T> cat = concat_channels(upsample2x(cur), c.enc_out[level]);
      cur = decs_[i].forward(cat, c.decs[i], update_sn);
    }
    return cur;
  }

  /// Returns the input gradient when need_gx; parameter gradients accumulate.
  Tensor<T> backward(const Tensor<T>& gout, const TrunkCache<T>& c,
                     bool need_gx) {
    std::vector<Tensor<T>> g_enc(levels_);  // skip-path gradients per level
    Tensor<T> g_cur = gout;
    for (int i = static_cast<int>(decs_.size()) - 1; i >= 0; --i) {
      const int level = levels_ - 2 - i;
      Tensor<T> g_cat;
      decs_[i].backward(g_cur, c.decs[i], &g_cat);
      const int up_ch = base_ * (1 << (level + 1));
      auto [g_up, g_skip] = split_channels(g_cat, up_ch);
      g_enc[level] = std::move(g_skip);
      g_cur = upsample2x_backward(g_up);
    }
    Tensor<T> g;
    mid_.backward(g_cur, c.mid, &g);
    for (int l = levels_ - 1; l >= 1; --l) {
      if (!g_enc[l].empty())
        for (std::size_t i = 0; i < g.size(); ++i) g.vec()[i] += g_enc[l].vec()[i];
      Tensor<T> gprev;
      downs_[l - 1].backward(g, c.downs[l - 1], &gprev);
      g = std::move(gprev);
    }
    if (!g_enc[0].empty())
      for (std::size_t i = 0; i < g.size(); ++i) g.vec()[i] += g_enc[0].vec()[i];
    Tensor<T> gx;
    stem_.backward(g, c.stem, need_gx ? &gx : nullptr);
    return gx;
  }

  /// Gating maps captured by the last forward, in execution order.
  void gating_maps(const TrunkCache<T>& c,
                   std::vector<std::pair<std::string, Tensor<T>>>& out) const {
    if (!gated_) return;
    out.emplace_back(stem_.name(), c.stem.gating);
    for (std::size_t i = 0; i < downs_.size(); ++i)
      out.emplace_back(downs_[i].name(), c.downs[i].gating);
    out.emplace_back(mid_.name(), c.mid.gating);
    for (std::size_t i = 0; i < decs_.size(); ++i)
      out.emplace_back(decs_[i].name(), c.decs[i].gating);
  }

 private:
  std::string prefix_;
  int base_ = 0, levels_ = 0;
  bool gated_ = false;
  ConvBlock<T> stem_, mid_;
  std::vector<ConvBlock<T>> downs_, decs_;
};

template <typename T>
struct RepCache {
  TrunkCache<T> trunk;
  Tensor<T> feat;
  Tensor<T> normal_raw;    // 3 x H x W head output before renormalization
  Tensor<T> normal_unit;   // after renormalization
  Tensor<T> boundary_pre;  // 1 x H x W logits
  Grid<T> boundary;
};

/// RGB -> (surface normals, occlusion boundary). Plain convolutions; the
/// normal head renormalizes to unit vectors, the boundary head squashes
/// through a sigmoid.
template <typename T>
class RepresentationNet {
 public:
  static constexpr double kNormEps = 1e-20;

  void configure(const NetworkConfig& cfg) {
    NetworkConfig c = cfg;
    c.input_channels = 3;
    c.output_channels = 4;
    trunk_.configure("rep", 3, c, /*gated=*/false, Activation::kLeakyRelu);
    normal_head_.configure("rep.normal_head",
                           ConvSpec{c.base_channels, 3, 3, 1, 1});
    boundary_head_.configure("rep.boundary_head",
                             ConvSpec{c.base_channels, 1, 3, 1, 1});
  }

  void init_params(Rng& rng) {
    trunk_.init_params(rng);
    normal_head_.init_params(rng);
    boundary_head_.init_params(rng);
  }

  void collect(ParamRefs<T>& refs) {
    trunk_.collect(refs);
    refs.add(normal_head_.w);
    refs.add(normal_head_.b);
    refs.add(boundary_head_.w);
    refs.add(boundary_head_.b);
  }

  int spatial_multiple() const { return trunk_.spatial_multiple(); }

  void forward(const Tensor<T>& rgb, RepCache<T>& c, bool update_sn) const {
    c.feat = trunk_.forward(rgb, c.trunk, update_sn);
    c.normal_raw = normal_head_.forward(c.feat);
    c.normal_unit = c.normal_raw;
    const int h = rgb.height(), w = rgb.width();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const T vx = c.normal_raw(0, y, x), vy = c.normal_raw(1, y, x),
                vz = c.normal_raw(2, y, x);
        const T s = std::sqrt(vx * vx + vy * vy + vz * vz + T(kNormEps));
        c.normal_unit(0, y, x) = vx / s;
        c.normal_unit(1, y, x) = vy / s;
        c.normal_unit(2, y, x) = vz / s;
      }
    c.boundary_pre = boundary_head_.forward(c.feat);
    c.boundary = Grid<T>(h, w);
    for (std::size_t i = 0; i < c.boundary.size(); ++i)
      c.boundary.vec()[i] = sigmoid(c.boundary_pre.vec()[i]);
  }

  void backward(const Tensor<T>& g_normals, const Grid<T>& g_boundary,
                const RepCache<T>& c) {
    const int h = c.boundary.height(), w = c.boundary.width();
    // d(v / |v|) via (g - n (n . g)) / |v|, with the same eps as forward.
    Tensor<T> g_raw(3, h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const T vx = c.normal_raw(0, y, x), vy = c.normal_raw(1, y, x),
                vz = c.normal_raw(2, y, x);
        const T s = std::sqrt(vx * vx + vy * vy + vz * vz + T(kNormEps));
        const T gx = g_normals(0, y, x), gy = g_normals(1, y, x),
                gz = g_normals(2, y, x);
        const T dot = vx * gx + vy * gy + vz * gz;
        const T s3 = s * s * s;
        g_raw(0, y, x) = gx / s - vx * dot / s3;
        g_raw(1, y, x) = gy / s - vy * dot / s3;
        g_raw(2, y, x) = gz / s - vz * dot / s3;
      }
    Tensor<T> g_bpre(1, h, w);
    for (std::size_t i = 0; i < g_bpre.size(); ++i) {
      const T sg = c.boundary.vec()[i];
      g_bpre.vec()[i] = g_boundary.vec()[i] * sg * (T(1) - sg);
    }
    Tensor<T> g_feat, g_feat_b;
    conv2d_backward(c.feat, normal_head_.w.value.data(), normal_head_.spec, g_raw,
                    normal_head_.w.grad.data(), normal_head_.b.grad.data(), &g_feat);
    conv2d_backward(c.feat, boundary_head_.w.value.data(), boundary_head_.spec,
                    g_bpre, boundary_head_.w.grad.data(),
                    boundary_head_.b.grad.data(), &g_feat_b);
    for (std::size_t i = 0; i < g_feat.size(); ++i)
      g_feat.vec()[i] += g_feat_b.vec()[i];
    trunk_.backward(g_feat, c.trunk, /*need_gx=*/false);
  }

 private:
  Trunk<T> trunk_;
  Conv2dLayer<T> normal_head_, boundary_head_;
};

template <typename T>
struct CompletionCache {
  Tensor<T> input;  // 8 x H x W
  TrunkCache<T> trunk;
  ConvBlockCache<T> head;
  Tensor<T> head_out;  // 1 x H x W, pre-softplus
  Grid<T> depth;
};

/// (RGB, raw depth, normals, boundary) -> complete depth. Gated-convolution
/// encoder-decoder; the raw-depth channel keeps 0 = missing and is scaled to
/// match the unit range of the other inputs. A softplus output map keeps every
/// predicted depth strictly positive.
template <typename T>
class CompletionNet {
 public:
  void configure(const NetworkConfig& cfg, bool gated, double depth_input_scale) {
    NetworkConfig c = cfg;
    c.input_channels = 8;
    c.output_channels = 1;
    gated_ = gated;
    depth_input_scale_ = depth_input_scale;
    trunk_.configure("comp", 8, c, gated, Activation::kLeakyRelu);
    head_.configure("comp.head", ConvSpec{c.base_channels, 1, 3, 1, 1}, gated,
                    Activation::kIdentity);
  }

  void init_params(Rng& rng) {
    trunk_.init_params(rng);
    head_.init_params(rng);
    // Start the softplus head near typical indoor depth instead of at ~0.7 m.
    for (T& b : head_.feature_bias().value) b = T(2);
  }

  void collect(ParamRefs<T>& refs) {
    trunk_.collect(refs);
    head_.collect(refs);
  }

  int spatial_multiple() const { return trunk_.spatial_multiple(); }
  bool gated() const { return gated_; }

  Tensor<T> assemble_input(const RgbImage<T>& rgb, const DepthMap<T>& raw,
                           const Tensor<T>& normals, const Grid<T>& boundary) const {
    const int h = rgb.height(), w = rgb.width();
    if (raw.height() != h || raw.width() != w || normals.height() != h ||
        normals.width() != w || boundary.height() != h || boundary.width() != w)
      raise<ShapeError>("completion inputs disagree on spatial size");
    Tensor<T> in(8, h, w);
    std::copy(rgb.values.data(), rgb.values.data() + rgb.values.size(), in.data());
    const std::size_t plane = in.plane();
    T* d = in.channel(3);
    for (std::size_t i = 0; i < plane; ++i)
      d[i] = raw.values.vec()[i] * static_cast<T>(depth_input_scale_);
    std::copy(normals.data(), normals.data() + normals.size(), in.channel(4));
    std::copy(boundary.data(), boundary.data() + plane, in.channel(7));
    return in;
  }

  void forward(Tensor<T> input, CompletionCache<T>& c, bool update_sn) const {
    c.input = std::move(input);
    Tensor<T> feat = trunk_.forward(c.input, c.trunk, update_sn);
    c.head_out = head_.forward(feat, c.head, update_sn);
    c.depth = Grid<T>(c.input.height(), c.input.width());
    for (std::size_t i = 0; i < c.depth.size(); ++i)
      c.depth.vec()[i] = softplus(c.head_out.vec()[i]);
  }

  /// Input gradient, split as (normals 3ch, boundary 1ch); rgb/raw-depth input
  /// gradients are discarded (those channels are data).
  std::pair<Tensor<T>, Grid<T>> backward(const Grid<T>& g_depth,
                                         const CompletionCache<T>& c) {
    Tensor<T> g_head(1, g_depth.height(), g_depth.width());
    for (std::size_t i = 0; i < g_head.size(); ++i)
      g_head.vec()[i] = g_depth.vec()[i] * sigmoid(c.head_out.vec()[i]);
    Tensor<T> g_feat;
    head_.backward(g_head, c.head, &g_feat);
    Tensor<T> g_in = trunk_.backward(g_feat, c.trunk, /*need_gx=*/true);
    Tensor<T> g_normals(3, g_depth.height(), g_depth.width());
    std::copy(g_in.channel(4), g_in.channel(7), g_normals.data());
    Grid<T> g_boundary(g_depth.height(), g_depth.width());
    std::copy(g_in.channel(7), g_in.channel(7) + g_in.plane(), g_boundary.data());
    return {std::move(g_normals), std::move(g_boundary)};
  }

  void gating_maps(const CompletionCache<T>& c,
                   std::vector<std::pair<std::string, Tensor<T>>>& out) const {
    trunk_.gating_maps(c.trunk, out);
    if (head_.gated()) out.emplace_back(head_.name(), c.head.gating);
  }

 private:
  Trunk<T> trunk_;
  ConvBlock<T> head_;
  bool gated_ = true;
  double depth_input_scale_ = 1.0 / 16.0;
};

template <typename T>
struct BoundaryNetCache {
  Tensor<T> input;
  TrunkCache<T> trunk;
  Tensor<T> feat;
  Tensor<T> pre;
  Grid<T> boundary;
};

/// Complete depth -> occlusion boundary. Plain-convolution U-Net; consumes the
/// completion output so its loss shapes the completion network through the
/// depth input.
template <typename T>
class BoundaryNet {
 public:
  void configure(const NetworkConfig& cfg) {
    NetworkConfig c = cfg;
    c.input_channels = 1;
    c.output_channels = 1;
    trunk_.configure("bc", 1, c, /*gated=*/false, Activation::kLeakyRelu);
    head_.configure("bc.head", ConvSpec{c.base_channels, 1, 3, 1, 1});
  }

  void init_params(Rng& rng) {
    trunk_.init_params(rng);
    head_.init_params(rng);
  }

  void collect(ParamRefs<T>& refs) {
    trunk_.collect(refs);
    refs.add(head_.w);
    refs.add(head_.b);
  }

  int spatial_multiple() const { return trunk_.spatial_multiple(); }

  void forward(const Grid<T>& depth, BoundaryNetCache<T>& c, bool update_sn) const {
    c.input = Tensor<T>(1, depth.height(), depth.width());
    std::copy(depth.data(), depth.data() + depth.size(), c.input.data());
    c.feat = trunk_.forward(c.input, c.trunk, update_sn);
    c.pre = head_.forward(c.feat);
    c.boundary = Grid<T>(depth.height(), depth.width());
    for (std::size_t i = 0; i < c.boundary.size(); ++i)
      c.boundary.vec()[i] = sigmoid(c.pre.vec()[i]);
  }

  /// Returns the gradient w.r.t. the input depth.
  Grid<T> backward(const Grid<T>& g_boundary, const BoundaryNetCache<T>& c) {
    Tensor<T> g_pre(1, c.boundary.height(), c.boundary.width());
    for (std::size_t i = 0; i < g_pre.size(); ++i) {
      const T sg = c.boundary.vec()[i];
      g_pre.vec()[i] = g_boundary.vec()[i] * sg * (T(1) - sg);
    }
    Tensor<T> g_feat;
    conv2d_backward(c.feat, head_.w.value.data(), head_.spec, g_pre,
                    head_.w.grad.data(), head_.b.grad.data(), &g_feat);
    Tensor<T> g_in = trunk_.backward(g_feat, c.trunk, /*need_gx=*/true);
    Grid<T> g_depth(c.boundary.height(), c.boundary.width());
    std::copy(g_in.data(), g_in.data() + g_in.size(), g_depth.data());
    return g_depth;
  }

 private:
  Trunk<T> trunk_;
  Conv2dLayer<T> head_;
};

}  // namespace depthfill::nn
