#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "depthfill/checkpoint.hpp"
#include "depthfill/networks.hpp"
#include "depthfill/rng.hpp"

namespace depthfill::nn {

struct PipelineOptions {
  NetworkConfig net;
  bool use_sa = true;   // gated blocks in the completion network
  bool use_bc = true;   // instantiate the boundary-consistency network
  bool teacher_force_representations = false;  // feed gt reps to completion
  double depth_input_scale = 1.0 / 16.0;
};

/// The two-stage model: a representation network (RGB -> normals, boundary),
/// the gated-convolution completion network (8 channels -> depth), and an
/// optional boundary-consistency network consuming the completed depth.
template <typename T>
class Pipeline {
 public:
  struct Cache {
    RepCache<T> rep;
    CompletionCache<T> comp;
    BoundaryNetCache<T> bc;
    bool has_bc = false;
    bool teacher_forced = false;
  };

  void configure(const PipelineOptions& opts) {
    opts_ = opts;
    opts_.net.validate();
    rep_.configure(opts_.net);
    comp_.configure(opts_.net, opts_.use_sa, opts_.depth_input_scale);
    if (opts_.use_bc) {
      bc_.emplace();
      bc_->configure(opts_.net);
    } else {
      bc_.reset();
    }
  }

  void init_params(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x9017'5eedULL));
    rep_.init_params(rng);
    comp_.init_params(rng);
    if (bc_) bc_->init_params(rng);
  }

  const PipelineOptions& options() const { return opts_; }
  bool has_bc() const { return bc_.has_value(); }
  int spatial_multiple() const { return comp_.spatial_multiple(); }

  ParamRefs<T> refs() {
    ParamRefs<T> r;
    rep_.collect(r);
    comp_.collect(r);
    if (bc_) bc_->collect(r);
    return r;
  }

  /// Canonical configuration string hashed into checkpoint fingerprints.
  std::string config_string() const {
    return strcat_("df1;base=", opts_.net.base_channels,
                   ";levels=", opts_.net.depth_levels, ";sa=", opts_.use_sa,
                   ";bc=", opts_.use_bc, ";dscale=", opts_.depth_input_scale);
  }

  /// Full training-path forward. Input size must be a multiple of the trunk
  /// stride product. gt_normals/gt_boundary are consulted only under teacher
  /// forcing.
  void forward(const RgbImage<T>& rgb, const DepthMap<T>& raw,
               const NormalMap<T>* gt_normals, const BoundaryMap<T>* gt_boundary,
               Cache& c, bool update_sn) const {
    rep_.forward(rgb.values, c.rep, update_sn);
    c.teacher_forced = opts_.teacher_force_representations;
    const Tensor<T>* normals = &c.rep.normal_unit;
    const Grid<T>* boundary = &c.rep.boundary;
    if (c.teacher_forced) {
      if (!gt_normals || !gt_boundary)
        raise<UsageError>("teacher forcing requires ground-truth representations");
      normals = &gt_normals->values;
      boundary = &gt_boundary->values;
    }
    comp_.forward(comp_.assemble_input(rgb, raw, *normals, *boundary), c.comp,
                  update_sn);
    c.has_bc = bc_.has_value();
    if (bc_) bc_->forward(c.comp.depth, c.bc, update_sn);
  }

  /// Routes output gradients back through the graph. g_bc may be empty when
  /// the boundary-consistency term carries no weight.
  void backward(const Cache& c, const Grid<T>& g_depth_direct, const Grid<T>& g_bc,
                const Tensor<T>& g_rep_normals, const Grid<T>& g_rep_boundary) {
    Grid<T> g_depth = g_depth_direct;
    if (c.has_bc && !g_bc.empty()) {
      Grid<T> extra = bc_->backward(g_bc, c.bc);
      for (std::size_t i = 0; i < g_depth.size(); ++i)
        g_depth.vec()[i] += extra.vec()[i];
    }
    auto [g_n_in, g_b_in] = comp_.backward(g_depth, c.comp);
    Tensor<T> g_n = g_rep_normals;
    Grid<T> g_b = g_rep_boundary;
    if (!c.teacher_forced) {
      for (std::size_t i = 0; i < g_n.size(); ++i) g_n.vec()[i] += g_n_in.vec()[i];
      for (std::size_t i = 0; i < g_b.size(); ++i) g_b.vec()[i] += g_b_in.vec()[i];
    }
    rep_.backward(g_n, g_b, c.rep);
  }

  /// Inference: predicted representations feed completion; inputs of any size
  /// are zero-padded to the trunk multiple and the output cropped back.
  DepthMap<T> complete(const RgbImage<T>& rgb, const DepthMap<T>& raw,
                       std::vector<std::pair<std::string, Tensor<T>>>* attention =
                           nullptr) const {
    const int h = rgb.height(), w = rgb.width();
    const int m = spatial_multiple();
    const int ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
    RgbImage<T> prgb = rgb;
    DepthMap<T> praw = raw;
    if (ph != h || pw != w) {
      prgb = RgbImage<T>(ph, pw);
      praw = DepthMap<T>(ph, pw);
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) prgb.values(c, y, x) = rgb.values(c, y, x);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) praw(y, x) = raw(y, x);
    }
    Cache c;
    rep_.forward(prgb.values, c.rep, /*update_sn=*/false);
    comp_.forward(comp_.assemble_input(prgb, praw, c.rep.normal_unit, c.rep.boundary),
                  c.comp, /*update_sn=*/false);
    if (attention) comp_.gating_maps(c.comp, *attention);
    DepthMap<T> out(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out(y, x) = c.comp.depth(y, x);
    return out;
  }

  /// Gating tensors captured from a completion forward pass on these inputs.
  std::vector<std::pair<std::string, Tensor<T>>> attention_maps(
      const RgbImage<T>& rgb, const DepthMap<T>& raw) const {
    std::vector<std::pair<std::string, Tensor<T>>> maps;
    complete(rgb, raw, &maps);
    return maps;
  }

  Checkpoint make_checkpoint(std::int64_t step) {
    Checkpoint ck;
    ck.config = config_string();
    ck.step = step;
    ParamRefs<T> r = refs();
    pack_params(r, ck);
    return ck;
  }

  void load(const Checkpoint& ck) {
    ParamRefs<T> r = refs();
    unpack_params(ck, r, config_string());
  }

  RepresentationNet<T>& representation() { return rep_; }
  CompletionNet<T>& completion() { return comp_; }
  BoundaryNet<T>& boundary_net() { return *bc_; }

 private:
  PipelineOptions opts_;
  RepresentationNet<T> rep_;
  CompletionNet<T> comp_;
  std::optional<BoundaryNet<T>> bc_;
};

}  // namespace depthfill::nn
