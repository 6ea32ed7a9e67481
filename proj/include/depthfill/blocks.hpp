#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "depthfill/conv.hpp"
#include "depthfill/rng.hpp"
#include "depthfill/spectral_norm.hpp"
#include "depthfill/tensor.hpp"

namespace depthfill::nn {

enum class Activation { kLeakyRelu, kIdentity };

inline constexpr double kLeakySlope = 0.2;

template <typename T>
T activate(T x, Activation a) {
  if (a == Activation::kIdentity) return x;
  return x >= T(0) ? x : static_cast<T>(kLeakySlope) * x;
}

template <typename T>
T activate_grad(T pre, Activation a) {
  if (a == Activation::kIdentity) return T(1);
  return pre >= T(0) ? T(1) : static_cast<T>(kLeakySlope);
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T softplus(T x) {
  return x > T(30) ? x : std::log1p(std::exp(std::min(x, T(30))));
}

/// Named trainable array with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  void configure(std::string n, std::vector<int> s) {
    name = std::move(n);
    shape = std::move(s);
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }
  std::size_t count() const { return value.size(); }
  void zero_grad() { grad.assign(grad.size(), T(0)); }
};

/// Non-trainable persistent state saved in checkpoints (power-iteration vectors).
template <typename T>
struct BufferRef {
  std::string name;
  std::vector<T>* data;
};

template <typename T>
struct ParamRefs {
  std::vector<Param<T>*> params;
  std::vector<BufferRef<T>> buffers;

  void add(Param<T>& p) { params.push_back(&p); }
  void add_buffer(std::string name, std::vector<T>& v) {
    buffers.push_back({std::move(name), &v});
  }
};

/// Raw convolution + bias. Weight normalization (when any) is applied by the
/// owning block, which passes the effective weights in.
template <typename T>
struct Conv2dLayer {
  ConvSpec spec;
  Param<T> w, b;

  void configure(const std::string& prefix, const ConvSpec& s) {
    spec = s;
    w.configure(prefix + ".w", {s.out_ch, s.in_ch, s.kernel, s.kernel});
    b.configure(prefix + ".b", {s.out_ch});
  }

  void init_params(Rng& rng) {
    const double stddev =
        std::sqrt(2.0 / (static_cast<double>(spec.in_ch) * spec.kernel * spec.kernel));
    for (T& x : w.value) x = static_cast<T>(rng.normal(0.0, stddev));
    for (T& x : b.value) x = T(0);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv2d_forward(x, w.value.data(), b.value.data(), spec);
  }
};

template <typename T>
struct ConvBlockCache {
  Tensor<T> x;
  Tensor<T> pre_f, feature;
  Tensor<T> gating;  // empty for plain blocks
  std::vector<T> wn_f, wn_g;
  T sigma_f = T(1), sigma_g = T(1);
};

/// One network block. Gated: Output = phi(SN(Conv_f(x))) * sigmoid(SN(Conv_g(x))),
/// elementwise. Plain: Output = phi(Conv_f(x)); used by the representation and
/// boundary networks and by the no-attention ablation.
template <typename T>
class ConvBlock {
 public:
  void configure(const std::string& name, const ConvSpec& spec, bool gated,
                 Activation phi) {
    name_ = name;
    gated_ = gated;
    phi_ = phi;
    f_.configure(name + ".f", spec);
    if (gated_) g_.configure(name + ".g", spec);
  }

  void init_params(Rng& rng) {
    f_.init_params(rng);
    sn_f_.init(f_.spec.weight_rows(), f_.spec.weight_cols(), rng);
    if (gated_) {
      g_.init_params(rng);
      sn_g_.init(g_.spec.weight_rows(), g_.spec.weight_cols(), rng);
    }
  }

  void collect(ParamRefs<T>& refs) {
    refs.add(f_.w);
    refs.add(f_.b);
    if (gated_) {
      refs.add(g_.w);
      refs.add(g_.b);
    }
    refs.add_buffer(name_ + ".f.sn_u", sn_f_.u);
    refs.add_buffer(name_ + ".f.sn_v", sn_f_.v);
    if (gated_) {
      refs.add_buffer(name_ + ".g.sn_u", sn_g_.u);
      refs.add_buffer(name_ + ".g.sn_v", sn_g_.v);
    }
  }

  const std::string& name() const { return name_; }
  bool gated() const { return gated_; }
  const ConvSpec& spec() const { return f_.spec; }
  Param<T>& feature_weights() { return f_.w; }
  Param<T>& feature_bias() { return f_.b; }
  Param<T>& gate_weights() { return g_.w; }
  Param<T>& gate_bias() { return g_.b; }

  /// update_sn: run one power iteration before measuring sigma (training
  /// mode). In eval mode the persistent vectors are left untouched; sigma is
  /// still recomputed from the current weights.
  Tensor<T> forward(const Tensor<T>& x, ConvBlockCache<T>& cache,
                    bool update_sn) const {
    cache.x = x;
    if (!gated_) {
      cache.pre_f = f_.forward(x);
      cache.feature = apply_phi(cache.pre_f);
      return cache.feature;
    }
    const int rows = f_.spec.weight_rows(), cols = f_.spec.weight_cols();
    if (update_sn) {
      sn_f_.update(f_.w.value.data(), rows, cols, 1);
      sn_g_.update(g_.w.value.data(), rows, cols, 1);
    }
    cache.sigma_f = std::max(sn_f_.sigma(f_.w.value.data(), rows, cols), T(kSigmaFloor));
    cache.sigma_g = std::max(sn_g_.sigma(g_.w.value.data(), rows, cols), T(kSigmaFloor));
    cache.wn_f = scaled(f_.w.value, T(1) / cache.sigma_f);
    cache.wn_g = scaled(g_.w.value, T(1) / cache.sigma_g);

    cache.pre_f = conv2d_forward(x, cache.wn_f.data(), f_.b.value.data(), f_.spec);
    cache.feature = apply_phi(cache.pre_f);
    Tensor<T> pre_g = conv2d_forward(x, cache.wn_g.data(), g_.b.value.data(), g_.spec);
    cache.gating = pre_g;
    for (T& v : cache.gating.vec()) v = sigmoid(v);

    Tensor<T> out = cache.feature;
    for (std::size_t i = 0; i < out.size(); ++i)
      out.vec()[i] *= cache.gating.vec()[i];
    return out;
  }

  /// Accumulates parameter gradients; writes the input gradient when gx is
  /// non-null. Power-iteration vectors are treated as constants.
  void backward(const Tensor<T>& gout, const ConvBlockCache<T>& cache,
                Tensor<T>* gx) {
    if (!gated_) {
      Tensor<T> gpre = gout;
      for (std::size_t i = 0; i < gpre.size(); ++i)
        gpre.vec()[i] *= activate_grad(cache.pre_f.vec()[i], phi_);
      conv2d_backward(cache.x, f_.w.value.data(), f_.spec, gpre,
                      f_.w.grad.data(), f_.b.grad.data(), gx);
      return;
    }
    const int rows = f_.spec.weight_rows(), cols = f_.spec.weight_cols();
    const std::size_t n = gout.size();
    Tensor<T> gpre_f = gout, gpre_g = gout;
    for (std::size_t i = 0; i < n; ++i) {
      const T go = gout.vec()[i];
      const T gate = cache.gating.vec()[i];
      gpre_f.vec()[i] =
          go * gate * activate_grad(cache.pre_f.vec()[i], phi_);
      gpre_g.vec()[i] = go * cache.feature.vec()[i] * gate * (T(1) - gate);
    }
    std::vector<T> g_wn_f(f_.w.count(), T(0)), g_wn_g(g_.w.count(), T(0));
    Tensor<T> gx_f, gx_g;
    conv2d_backward(cache.x, cache.wn_f.data(), f_.spec, gpre_f, g_wn_f.data(),
                    f_.b.grad.data(), gx ? &gx_f : nullptr);
    conv2d_backward(cache.x, cache.wn_g.data(), g_.spec, gpre_g, g_wn_g.data(),
                    g_.b.grad.data(), gx ? &gx_g : nullptr);
    spectral_norm_backward(g_wn_f, cache.wn_f, sn_f_, cache.sigma_f,
                           f_.w.grad.data(), rows, cols);
    spectral_norm_backward(g_wn_g, cache.wn_g, sn_g_, cache.sigma_g,
                           g_.w.grad.data(), rows, cols);
    if (gx) {
      *gx = gx_f;
      for (std::size_t i = 0; i < gx->size(); ++i)
        gx->vec()[i] += gx_g.vec()[i];
    }
  }

 private:
  Tensor<T> apply_phi(const Tensor<T>& pre) const {
    Tensor<T> out = pre;
    if (phi_ != Activation::kIdentity)
      for (T& v : out.vec()) v = activate(v, phi_);
    return out;
  }
  static std::vector<T> scaled(const std::vector<T>& w, T s) {
    std::vector<T> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] * s;
    return out;
  }

  std::string name_;
  bool gated_ = false;
  Activation phi_ = Activation::kLeakyRelu;
  Conv2dLayer<T> f_, g_;
  mutable SpectralNorm<T> sn_f_, sn_g_;
};

/// Nearest-neighbor 2x upsampling.
template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  Tensor<T> out(x.channels(), x.height() * 2, x.width() * 2);
  for (int c = 0; c < x.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int xx = 0; xx < out.width(); ++xx)
        out(c, y, xx) = x(c, y / 2, xx / 2);
  return out;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& gout) {
  Tensor<T> gx(gout.channels(), gout.height() / 2, gout.width() / 2);
  for (int c = 0; c < gout.channels(); ++c)
    for (int y = 0; y < gout.height(); ++y)
      for (int xx = 0; xx < gout.width(); ++xx)
        gx(c, y / 2, xx / 2) += gout(c, y, xx);
  return gx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.height() != b.height() || a.width() != b.width())
    raise<ShapeError>("concat: spatial mismatch ", a.height(), "x", a.width(),
                      " vs ", b.height(), "x", b.width());
  Tensor<T> out(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.data(), a.data() + a.size(), out.data());
  std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, int first) {
  Tensor<T> a(first, g.height(), g.width());
  Tensor<T> b(g.channels() - first, g.height(), g.width());
  std::copy(g.data(), g.data() + a.size(), a.data());
  std::copy(g.data() + a.size(), g.data() + g.size(), b.data());
  return {std::move(a), std::move(b)};
}

}  // namespace depthfill::nn
