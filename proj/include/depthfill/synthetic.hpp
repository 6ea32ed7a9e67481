#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "depthfill/edges.hpp"
#include "depthfill/errors.hpp"
#include "depthfill/rng.hpp"
#include "depthfill/types.hpp"

namespace depthfill::synth {

/// Parameters of the procedural indoor generator. Defaults target a raw-depth
/// hole fraction of roughly 10-25% of pixels.
struct SceneConfig {
  // Room geometry (camera at the origin, x right, y down, z forward).
  double camera_height_min = 1.0, camera_height_max = 1.6;
  double back_wall_min = 2.2, back_wall_max = 4.2;
  double side_wall_min = 1.2, side_wall_max = 2.4;
  int min_walls = 2, max_walls = 3;  // counting the back wall
  int min_boxes = 1, max_boxes = 4;
  double box_min_size = 0.25, box_max_size = 0.9;

  // Hole carving for the raw depth.
  int min_blobs = 2, max_blobs = 6;
  double blob_min_radius = 0.04, blob_max_radius = 0.13;  // fraction of min(H,W)
  double far_cutoff = 3.6;          // meters; depth beyond this is dropped
  double max_hole_fraction = 0.9;   // carving more than this is a config error

  // Ground-truth boundary target.
  double sobel_saturation = 1.0;
  bool binarize_boundary = false;
  double binarize_threshold = 0.25;

  std::optional<CameraIntrinsics> intrinsics;  // default fx=fy=W/2, principal center

  void validate() const {
    if (min_walls < 1 || max_walls > 3 || min_walls > max_walls)
      raise<ConfigError>("SceneConfig: wall count range [", min_walls, ",",
                         max_walls, "] invalid");
    if (min_boxes < 0 || min_boxes > max_boxes)
      raise<ConfigError>("SceneConfig: box count range [", min_boxes, ",",
                         max_boxes, "] invalid");
    if (min_blobs < 0 || min_blobs > max_blobs)
      raise<ConfigError>("SceneConfig: blob count range invalid");
    if (!(far_cutoff > 0) || !(sobel_saturation > 0))
      raise<ConfigError>("SceneConfig: cutoff/saturation must be positive");
  }
};

namespace detail {

struct Aabb {
  std::array<double, 3> lo, hi;
};

struct Scene {
  double floor_y = 0;
  double back_z = 0;
  std::optional<double> left_x, right_x;  // wall planes x = -left_x, x = +right_x
  std::vector<Aabb> boxes;
  std::vector<std::array<double, 3>> albedo;  // per surface id
  std::array<double, 3> light = {0, -1, 0};   // unit, surface-to-light
};

// Surface ids: 0 floor, 1 back wall, 2 left, 3 right, 4+i box i.
struct Hit {
  double t = 0;
  int surface = -1;
  std::array<double, 3> normal = {0, 0, 0};
};

inline Scene build_scene(Rng& rng, const SceneConfig& cfg) {
  Scene s;
  s.floor_y = rng.uniform(cfg.camera_height_min, cfg.camera_height_max);
  s.back_z = rng.uniform(cfg.back_wall_min, cfg.back_wall_max);
  const int walls = static_cast<int>(rng.uniform_int(cfg.min_walls, cfg.max_walls));
  const bool left_first = rng.uniform() < 0.5;
  if (walls >= 2) {
    const double side = rng.uniform(cfg.side_wall_min, cfg.side_wall_max);
    (left_first ? s.left_x : s.right_x) = side;
  }
  if (walls >= 3) {
    const double side = rng.uniform(cfg.side_wall_min, cfg.side_wall_max);
    (left_first ? s.right_x : s.left_x) = side;
  }
  const int boxes = static_cast<int>(rng.uniform_int(cfg.min_boxes, cfg.max_boxes));
  for (int i = 0; i < boxes; ++i) {
    const double sx = rng.uniform(cfg.box_min_size, cfg.box_max_size);
    const double sy = rng.uniform(cfg.box_min_size, cfg.box_max_size);
    const double sz = rng.uniform(cfg.box_min_size, cfg.box_max_size);
    const double xmin = s.left_x ? -*s.left_x + 0.1 : -1.8;
    const double xmax = (s.right_x ? *s.right_x - 0.1 : 1.8) - sx;
    const double zmin = 0.9, zmax = std::max(zmin + 0.05, s.back_z - 0.15 - sz);
    Aabb b;
    b.lo[0] = rng.uniform(xmin, std::max(xmin, xmax));
    b.lo[2] = rng.uniform(zmin, zmax);
    b.hi[0] = b.lo[0] + sx;
    b.hi[2] = b.lo[2] + sz;
    b.hi[1] = s.floor_y;        // resting on the floor
    b.lo[1] = s.floor_y - sy;
    s.boxes.push_back(b);
  }
  // One albedo per surface id (4 fixed surfaces + boxes).
  for (int i = 0; i < 4 + boxes; ++i)
    s.albedo.push_back({rng.uniform(0.15, 0.95), rng.uniform(0.15, 0.95),
                        rng.uniform(0.15, 0.95)});
  double lx = rng.uniform(-0.5, 0.5);
  double ly = rng.uniform(-0.9, -0.4);
  double lz = rng.uniform(-0.8, -0.3);
  const double ln = std::sqrt(lx * lx + ly * ly + lz * lz);
  s.light = {lx / ln, ly / ln, lz / ln};
  return s;
}

inline Hit cast_ray(const Scene& s, const std::array<double, 3>& d) {
  Hit best;
  best.t = s.back_z;  // the back wall catches every forward ray
  best.surface = 1;
  best.normal = {0, 0, -1};
  if (d[1] > 1e-9) {
    const double t = s.floor_y / d[1];
    if (t < best.t) best = {t, 0, {0, -1, 0}};
  }
  if (s.left_x && d[0] < -1e-9) {
    const double t = -*s.left_x / d[0];
    if (t < best.t) best = {t, 2, {1, 0, 0}};
  }
  if (s.right_x && d[0] > 1e-9) {
    const double t = *s.right_x / d[0];
    if (t < best.t) best = {t, 3, {-1, 0, 0}};
  }
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    const Aabb& b = s.boxes[i];
    double tnear = -1e30, tfar = 1e30;
    int axis = -1;
    bool miss = false;
    for (int a = 0; a < 3 && !miss; ++a) {
      if (std::abs(d[a]) < 1e-12) {
        if (b.lo[a] > 0 || b.hi[a] < 0) miss = true;
        continue;
      }
      double t0 = b.lo[a] / d[a], t1 = b.hi[a] / d[a];
      if (t0 > t1) std::swap(t0, t1);
      if (t0 > tnear) {
        tnear = t0;
        axis = a;
      }
      tfar = std::min(tfar, t1);
    }
    if (miss || tnear > tfar || tnear < 0.05 || tnear >= best.t || axis < 0)
      continue;
    Hit h;
    h.t = tnear;
    h.surface = 4 + static_cast<int>(i);
    h.normal = {0, 0, 0};
    h.normal[axis] = d[axis] > 0 ? -1.0 : 1.0;
    best = h;
  }
  return best;
}

}  // namespace detail

/// Deterministic procedural sample: a piecewise-planar room rendered by ray
/// casting, with analytic normals, a Sobel boundary target, and a raw depth
/// produced by carving smooth blobs plus a far-distance cutoff out of the
/// complete depth.
template <typename T>
Sample<T> make_synthetic_scene(std::uint64_t seed, int height, int width,
                               const SceneConfig& cfg = {}) {
  if (height < 32 || width < 32)
    raise<ShapeError>("make_synthetic_scene requires at least 32x32, got ",
                      height, "x", width);
  cfg.validate();
  const CameraIntrinsics k =
      cfg.intrinsics ? *cfg.intrinsics : CameraIntrinsics::defaulted(width, height);
  k.validate(width, height);

  Rng rng(mix_seed(seed, 0x5ce9'a11ce5ULL));
  const detail::Scene scene = detail::build_scene(rng, cfg);

  Sample<T> s;
  s.id = strcat_("synth-", seed);
  s.gt_depth = DepthMap<T>(height, width);
  s.gt_normals = NormalMap<T>(height, width);
  s.rgb = RgbImage<T>(height, width);

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::array<double, 3> d = {(x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0};
      const detail::Hit hit = detail::cast_ray(scene, d);
      s.gt_depth(y, x) = static_cast<T>(hit.t);  // d.z == 1, so t is z-depth
      s.gt_normals.values(0, y, x) = static_cast<T>(hit.normal[0]);
      s.gt_normals.values(1, y, x) = static_cast<T>(hit.normal[1]);
      s.gt_normals.values(2, y, x) = static_cast<T>(hit.normal[2]);
      s.gt_normals.validity(y, x) = 1;
      const double lambert = std::max(
          0.0, hit.normal[0] * scene.light[0] + hit.normal[1] * scene.light[1] +
                   hit.normal[2] * scene.light[2]);
      const double shade = 0.35 + 0.65 * lambert;
      const auto& alb = scene.albedo[hit.surface];
      for (int c = 0; c < 3; ++c)
        s.rgb.values(c, y, x) =
            static_cast<T>(std::clamp(alb[c] * shade, 0.0, 1.0));
    }
  }

  BoundaryMap<T> b =
      edges::sobel_boundary(s.gt_depth, static_cast<T>(cfg.sobel_saturation));
  s.gt_boundary =
      cfg.binarize_boundary ? edges::binarize(b, static_cast<T>(cfg.binarize_threshold)) : b;

  // Carve holes: union of rotated ellipses plus the far cutoff.
  s.raw_depth = s.gt_depth;
  const int blobs = static_cast<int>(rng.uniform_int(cfg.min_blobs, cfg.max_blobs));
  const double rscale = std::min(height, width);
  struct Blob {
    double cx, cy, rx, ry, cos_t, sin_t;
  };
  std::vector<Blob> ellipses;
  for (int i = 0; i < blobs; ++i) {
    Blob e;
    e.cx = rng.uniform(0, width);
    e.cy = rng.uniform(0, height);
    e.rx = rng.uniform(cfg.blob_min_radius, cfg.blob_max_radius) * rscale;
    e.ry = rng.uniform(cfg.blob_min_radius, cfg.blob_max_radius) * rscale;
    const double theta = rng.uniform(0, 3.14159265358979323846);
    e.cos_t = std::cos(theta);
    e.sin_t = std::sin(theta);
    ellipses.push_back(e);
  }
  std::size_t carved = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      bool hole = static_cast<double>(s.gt_depth(y, x)) > cfg.far_cutoff;
      for (const Blob& e : ellipses) {
        if (hole) break;
        const double dx = x - e.cx, dy = y - e.cy;
        const double u = (dx * e.cos_t + dy * e.sin_t) / e.rx;
        const double v = (-dx * e.sin_t + dy * e.cos_t) / e.ry;
        hole = u * u + v * v <= 1.0;
      }
      if (hole) {
        s.raw_depth(y, x) = T(0);
        ++carved;
      }
    }
  }
  const double fraction =
      static_cast<double>(carved) / (static_cast<double>(height) * width);
  if (fraction > cfg.max_hole_fraction)
    raise<ConfigError>("scene config carved ", fraction,
                       " of pixels, above the allowed ", cfg.max_hole_fraction);

  s.validate();
  return s;
}

/// Fraction of raw-depth pixels that were carved out of the ground truth.
template <typename T>
double hole_fraction(const Sample<T>& s) {
  std::size_t holes = 0;
  for (const T& v : s.raw_depth.values.vec())
    if (!(v > T(0))) ++holes;
  return static_cast<double>(holes) / static_cast<double>(s.raw_depth.values.size());
}

}  // namespace depthfill::synth
