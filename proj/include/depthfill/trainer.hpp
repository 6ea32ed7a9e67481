#pragma once

#include <chrono>
#include <cstdio>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "depthfill/adam.hpp"
#include "depthfill/losses.hpp"
#include "depthfill/metrics.hpp"
#include "depthfill/pipeline.hpp"
#include "depthfill/synthetic.hpp"

namespace depthfill::train {

struct AblationFlags {
  bool use_sa = true;
  bool use_ssim = true;
  bool use_bc = true;
};

struct TrainConfig {
  std::int64_t steps = 2000;
  int batch_size = 2;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  AblationFlags ablation;
  losses::LossWeights loss;
  int log_every = 25;
  int patch = 64;  // square training crop
  bool teacher_force_representations = false;

  void validate() const {
    if (steps < 1 || batch_size < 1 || log_every < 1 || patch < 4)
      raise<ConfigError>("TrainConfig: steps/batch_size/log_every/patch must be positive");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate))
      raise<ConfigError>("TrainConfig: learning_rate must be positive, got ",
                         learning_rate);
    loss.validate();
  }

  /// Lambdas after applying the ablation switches.
  losses::LossWeights effective_weights() const {
    losses::LossWeights w = loss;
    if (!ablation.use_ssim) w.lambda_s = 0;
    if (!ablation.use_bc) w.lambda_bc = 0;
    return w;
  }
};

struct TrainLogEntry {
  std::int64_t step = 0;
  losses::LossReport loss;
  double wall_ms = 0;
};

template <typename T>
Sample<T> crop_sample(const Sample<T>& s, int y0, int x0, int size) {
  if (y0 < 0 || x0 < 0 || y0 + size > s.height() || x0 + size > s.width())
    raise<ShapeError>("crop ", size, "@(", y0, ",", x0, ") outside ", s.height(),
                      "x", s.width());
  Sample<T> out;
  out.id = s.id;
  out.rgb = RgbImage<T>(size, size);
  out.raw_depth = DepthMap<T>(size, size);
  out.gt_depth = DepthMap<T>(size, size);
  out.gt_normals = NormalMap<T>(size, size);
  out.gt_boundary = BoundaryMap<T>(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.rgb.values(c, y, x) = s.rgb.values(c, y0 + y, x0 + x);
        out.gt_normals.values(c, y, x) = s.gt_normals.values(c, y0 + y, x0 + x);
      }
      out.raw_depth(y, x) = s.raw_depth(y0 + y, x0 + x);
      out.gt_depth(y, x) = s.gt_depth(y0 + y, x0 + x);
      out.gt_normals.validity(y, x) = s.gt_normals.validity(y0 + y, x0 + x);
      out.gt_boundary(y, x) = s.gt_boundary(y0 + y, x0 + x);
    }
  return out;
}

namespace detail {
template <typename T>
Grid<T> to_scalar(const Grid<double>& g) {
  Grid<T> out(g.height(), g.width());
  for (std::size_t i = 0; i < g.size(); ++i) out.vec()[i] = static_cast<T>(g.vec()[i]);
  return out;
}
template <typename T>
Tensor<T> to_scalar(const Tensor<double>& t) {
  Tensor<T> out(t.channels(), t.height(), t.width());
  for (std::size_t i = 0; i < t.size(); ++i) out.vec()[i] = static_cast<T>(t.vec()[i]);
  return out;
}
}  // namespace detail

/// Runs the pipeline on one sample, assembles the weighted objective, and
/// (optionally) backpropagates it into the parameter gradients.
template <typename T>
losses::LossReport sample_losses(nn::Pipeline<T>& pipe, const Sample<T>& s,
                                 const TrainConfig& cfg,
                                 typename nn::Pipeline<T>::Cache& cache,
                                 bool update_sn, bool backprop) {
  const losses::LossWeights w = cfg.effective_weights();
  pipe.forward(s.rgb, s.raw_depth, &s.gt_normals, &s.gt_boundary, cache, update_sn);

  Grid<double> g_depth, g_bc, g_rep_boundary;
  Tensor<double> g_normals;
  Grid<double>* gd = backprop ? &g_depth : nullptr;

  const double l_sa = losses::masked_l1(cache.comp.depth, s.gt_depth.values, gd, 1.0);
  // The SSIM term is subtracted in the objective, hence the negative scale.
  const double l_s = losses::ssim_loss(cache.comp.depth, s.gt_depth.values, w,
                                       (backprop && w.lambda_s > 0) ? gd : nullptr,
                                       -w.lambda_s);
  double l_bc = 0;
  if (pipe.has_bc())
    l_bc = losses::boundary_consistency_loss(
        cache.bc.boundary, s.gt_boundary.values,
        (backprop && w.lambda_bc > 0) ? &g_bc : nullptr, w.lambda_bc);
  const double l_n =
      losses::normal_loss(cache.rep.normal_unit, s.gt_normals,
                          backprop ? &g_normals : nullptr, w.lambda_n);
  const double l_b =
      losses::boundary_rep_loss(cache.rep.boundary, s.gt_boundary.values,
                                backprop ? &g_rep_boundary : nullptr, w.lambda_b);

  if (backprop) {
    pipe.backward(cache, detail::to_scalar<T>(g_depth),
                  g_bc.empty() ? Grid<T>() : detail::to_scalar<T>(g_bc),
                  detail::to_scalar<T>(g_normals),
                  detail::to_scalar<T>(g_rep_boundary));
  }
  return losses::total_loss(l_sa, l_s, l_bc, l_n, l_b, w);
}

template <typename T>
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const nn::NetworkConfig& net)
      : cfg_(cfg), net_(net) {
    cfg_.validate();
    nn::PipelineOptions opts;
    opts.net = net;
    opts.use_sa = cfg.ablation.use_sa;
    opts.use_bc = cfg.ablation.use_bc;
    opts.teacher_force_representations = cfg.teacher_force_representations;
    pipe_.configure(opts);
    if (cfg_.patch % pipe_.spatial_multiple() != 0)
      raise<ConfigError>("patch ", cfg_.patch, " is not a multiple of ",
                         pipe_.spatial_multiple());
    refs_ = pipe_.refs();
    adam_.attach(refs_.params);
  }

  nn::Pipeline<T>& pipeline() { return pipe_; }
  std::int64_t current_step() const { return step_; }

  void init() { pipe_.init_params(cfg_.seed); }

  void resume(const Checkpoint& ck) {
    pipe_.load(ck);
    adam_.unpack(ck, ck.step);
    step_ = ck.step;
  }

  Checkpoint checkpoint() {
    Checkpoint ck = pipe_.make_checkpoint(step_);
    adam_.pack(ck);
    return ck;
  }

  /// One optimization step over a random batch of crops.
  losses::LossReport step(const std::vector<Sample<T>>& data) {
    if (data.empty()) raise<EmptyObservationError>("train: dataset is empty");
    Rng rng(mix_seed(mix_seed(cfg_.seed, 0xba7c4ULL), static_cast<std::uint64_t>(step_)));
    for (nn::Param<T>* p : refs_.params) p->zero_grad();

    double sa = 0, ss = 0, sbc = 0, sn = 0, sb = 0;
    for (int b = 0; b < cfg_.batch_size; ++b) {
      const Sample<T>& full = data[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1))];
      const int patch = std::min({cfg_.patch, full.height(), full.width()});
      const int py = static_cast<int>(rng.uniform_int(0, full.height() - patch));
      const int px = static_cast<int>(rng.uniform_int(0, full.width() - patch));
      Sample<T> view = crop_sample(full, py, px, patch);
      typename nn::Pipeline<T>::Cache cache;
      losses::LossReport r = sample_losses(pipe_, view, cfg_, cache,
                                           /*update_sn=*/true, /*backprop=*/true);
      sa += r.l_sa;
      ss += r.l_s;
      sbc += r.l_bc;
      sn += r.l_n;
      sb += r.l_b;
    }
    const double inv = 1.0 / cfg_.batch_size;
    for (nn::Param<T>* p : refs_.params)
      for (T& g : p->grad) g = static_cast<T>(g * inv);

    losses::LossReport report;
    try {
      report = losses::total_loss(sa * inv, ss * inv, sbc * inv, sn * inv,
                                  sb * inv, cfg_.effective_weights());
    } catch (const NonFiniteError& e) {
      raise<NonFiniteError>("step ", step_, ": ", e.what());
    }
    adam_.step(cfg_.learning_rate);
    ++step_;
    return report;
  }

  /// Runs to cfg.steps, emitting NDJSON log records to `log` (if given) every
  /// log_every steps plus the final step.
  std::vector<TrainLogEntry> run(const std::vector<Sample<T>>& data,
                                 std::ostream* log) {
    std::vector<TrainLogEntry> entries;
    const auto t0 = std::chrono::steady_clock::now();
    while (step_ < cfg_.steps) {
      const std::int64_t at = step_;
      losses::LossReport r = step(data);
      if (at % cfg_.log_every == 0 || at + 1 == cfg_.steps) {
        TrainLogEntry e;
        e.step = at;
        e.loss = r;
        e.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
        entries.push_back(e);
        if (log) {
          char buf[512];
          std::snprintf(buf, sizeof(buf),
                        "{\"step\":%lld,\"l_sa\":%.9g,\"l_s\":%.9g,\"l_bc\":%.9g,"
                        "\"l_n\":%.9g,\"l_b\":%.9g,\"total\":%.9g,\"wall_ms\":%.1f}",
                        static_cast<long long>(e.step), r.l_sa, r.l_s, r.l_bc,
                        r.l_n, r.l_b, r.total, e.wall_ms);
          (*log) << buf << '\n';
        }
      }
    }
    return entries;
  }

 private:
  TrainConfig cfg_;
  nn::NetworkConfig net_;
  nn::Pipeline<T> pipe_;
  nn::ParamRefs<T> refs_;
  nn::Adam<T> adam_;
  std::int64_t step_ = 0;
};

struct EvalResult {
  std::vector<std::string> ids;
  std::vector<metrics::MetricsReport> per_image;
  metrics::MetricsReport aggregate;
};

/// Per-image metric evaluation of the full pipeline. Images fan out across
/// `threads` workers; results reduce in index order, so the outcome does not
/// depend on the thread count.
template <typename T>
EvalResult evaluate_dataset(const nn::Pipeline<T>& pipe,
                            const std::vector<Sample<T>>& samples,
                            const losses::LossWeights& w = {}, int threads = 1) {
  if (samples.empty()) raise<EmptyObservationError>("evaluate: dataset is empty");
  EvalResult res;
  res.per_image.resize(samples.size());
  res.ids.resize(samples.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      DepthMap<T> pred = pipe.complete(samples[i].rgb, samples[i].raw_depth);
      res.per_image[i] = metrics::evaluate(pred, samples[i].gt_depth, w);
      res.ids[i] = samples[i].id;
    }
  };
  threads = std::max(1, std::min<int>(threads, static_cast<int>(samples.size())));
  if (threads == 1) {
    work(0, samples.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (samples.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(samples.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  res.aggregate = metrics::aggregate(res.per_image);
  return res;
}

// ---------------------------------------------------------------------------
// Gradient audit
// ---------------------------------------------------------------------------

struct GradcheckConfig {
  int height = 16, width = 16;
  std::uint64_t seed = 1;
  int per_net = 20;     // sampled parameters per network
  double eps = 0;         // 0 -> precision default (1e-5 double, 1e-3 float)
  double threshold = 0;   // 0 -> precision default (1e-3 double, 1e-2 float)
  double denom_floor = 0; // relative-error floor; 0 -> 1e-6 double, 1e-4 float.
                          // Differences below this scale sit inside central-
                          // difference roundoff and are compared against the
                          // floor instead of the vanishing gradient.
  nn::NetworkConfig net;
  losses::LossWeights loss;
  std::string corrupt;  // test hook: bias the reported analytic gradient of
                        // parameters whose name contains this substring
};

struct GradcheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0, numeric = 0, rel = 0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel = 0;
  double threshold = 0;
  std::string worst;
  bool pass = false;
};

template <typename T>
GradcheckReport gradcheck(const GradcheckConfig& gc) {
  const double eps = gc.eps > 0 ? gc.eps : (sizeof(T) == 8 ? 1e-5 : 1e-3);
  const double threshold =
      gc.threshold > 0 ? gc.threshold : (sizeof(T) == 8 ? 1e-3 : 1e-2);
  const double floor =
      gc.denom_floor > 0 ? gc.denom_floor : (sizeof(T) == 8 ? 1e-6 : 1e-4);

  // A 16x16 crop of a synthetic scene gives realistic inputs and targets.
  Sample<T> scene = synth::make_synthetic_scene<T>(gc.seed, 32, 32);
  Sample<T> s = crop_sample(scene, 8, 8, std::min({gc.height, gc.width, 16}));

  TrainConfig cfg;
  cfg.loss = gc.loss;
  cfg.seed = gc.seed;
  cfg.patch = s.height();
  nn::PipelineOptions opts;
  opts.net = gc.net;
  nn::Pipeline<T> pipe;
  pipe.configure(opts);
  pipe.init_params(gc.seed);
  nn::ParamRefs<T> refs = pipe.refs();

  // Settle the power-iteration state, then freeze it for the audit so the
  // finite differences see exactly the function the backward pass
  // differentiates.
  for (int i = 0; i < 5; ++i) {
    typename nn::Pipeline<T>::Cache warm;
    pipe.forward(s.rgb, s.raw_depth, &s.gt_normals, &s.gt_boundary, warm, true);
  }
  for (nn::Param<T>* p : refs.params) p->zero_grad();
  {
    typename nn::Pipeline<T>::Cache cache;
    sample_losses(pipe, s, cfg, cache, /*update_sn=*/false, /*backprop=*/true);
  }

  auto loss_at = [&]() {
    typename nn::Pipeline<T>::Cache cache;
    return sample_losses(pipe, s, cfg, cache, false, false).total;
  };

  GradcheckReport report;
  report.threshold = threshold;
  bool all_finite = true;
  Rng pick(mix_seed(gc.seed, 0x0a0d17ULL));
  for (const char* prefix : {"rep.", "comp.", "bc."}) {
    std::vector<nn::Param<T>*> group;
    for (nn::Param<T>* p : refs.params)
      if (p->name.rfind(prefix, 0) == 0) group.push_back(p);
    if (group.empty()) continue;
    for (int i = 0; i < gc.per_net; ++i) {
      nn::Param<T>* p = group[static_cast<std::size_t>(
          pick.uniform_int(0, static_cast<std::int64_t>(group.size()) - 1))];
      const std::size_t idx = static_cast<std::size_t>(
          pick.uniform_int(0, static_cast<std::int64_t>(p->count()) - 1));
      const T saved = p->value[idx];
      p->value[idx] = saved + static_cast<T>(eps);
      const double lp = loss_at();
      p->value[idx] = saved - static_cast<T>(eps);
      const double lm = loss_at();
      p->value[idx] = saved;

      GradcheckEntry e;
      e.param = p->name;
      e.index = idx;
      e.numeric = (lp - lm) / (2.0 * eps);
      e.analytic = static_cast<double>(p->grad[idx]);
      if (!gc.corrupt.empty() && p->name.find(gc.corrupt) != std::string::npos)
        e.analytic += 1.0;
      const double denom = std::max({std::abs(e.analytic), std::abs(e.numeric), floor});
      e.rel = std::abs(e.analytic - e.numeric) / denom;
      if (!std::isfinite(e.analytic) || !std::isfinite(e.numeric)) {
        all_finite = false;
        report.worst = p->name;
        e.rel = 1e30;
      }
      if (e.rel > report.max_rel) {
        report.max_rel = e.rel;
        report.worst = p->name;
      }
      report.entries.push_back(std::move(e));
    }
  }
  report.pass = all_finite && report.max_rel < threshold;
  return report;
}

// ---------------------------------------------------------------------------
// Ablation suite
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string label;
  AblationFlags flags;
  metrics::MetricsReport metrics;
};

struct AblationTable {
  std::vector<AblationRow> rows;
};

/// Trains the four variants with shared seeds and evaluates each on the
/// held-out set: W/O-SA, SA, SA+SSIM, SA+SSIM+BC.
template <typename T>
AblationTable ablation_suite(const TrainConfig& base, const nn::NetworkConfig& net,
                             const std::vector<Sample<T>>& train_set,
                             const std::vector<Sample<T>>& eval_set) {
  const AblationRow defs[4] = {
      {"W/O-SA", {false, false, false}, {}},
      {"SA", {true, false, false}, {}},
      {"SA+SSIM", {true, true, false}, {}},
      {"SA+SSIM+BC", {true, true, true}, {}},
  };
  AblationTable table;
  for (const AblationRow& def : defs) {
    TrainConfig cfg = base;
    cfg.ablation = def.flags;
    Trainer<T> trainer(cfg, net);
    trainer.init();
    trainer.run(train_set, nullptr);
    AblationRow row = def;
    row.metrics =
        evaluate_dataset(trainer.pipeline(), eval_set, cfg.effective_weights())
            .aggregate;
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline std::string ablation_to_text(const AblationTable& table) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-12s %9s %9s %9s %9s %9s %9s %9s %9s\n",
                "Model", "RMSE\xE2\x86\x93", "Mean\xE2\x86\x93", "SSIM\xE2\x86\x91",
                "1.05\xE2\x86\x91", "1.10\xE2\x86\x91", "1.25\xE2\x86\x91",
                "1.25^2\xE2\x86\x91", "1.25^3\xE2\x86\x91");
  os << buf;
  for (const AblationRow& r : table.rows) {
    std::snprintf(buf, sizeof(buf),
                  "%-12s %9.6f %9.6f %9.6f %9.6f %9.6f %9.6f %9.6f %9.6f\n",
                  r.label.c_str(), r.metrics.rmse, r.metrics.mean, r.metrics.ssim,
                  r.metrics.delta[0], r.metrics.delta[1], r.metrics.delta[2],
                  r.metrics.delta[3], r.metrics.delta[4]);
    os << buf;
  }
  return os.str();
}

}  // namespace depthfill::train
