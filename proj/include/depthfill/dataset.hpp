#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "depthfill/edges.hpp"
#include "depthfill/errors.hpp"
#include "depthfill/normals.hpp"
#include "depthfill/png_io.hpp"
#include "depthfill/synthetic.hpp"
#include "depthfill/types.hpp"

namespace depthfill {

/// Depth file convention: 16-bit single-channel PNG, stored = round(4000 * m).
inline constexpr double kDepthUnitsPerMeter = 4000.0;
inline constexpr double kMaxStorableDepth = 65535.0 / kDepthUnitsPerMeter;

struct LoadOptions {
  std::optional<CameraIntrinsics> intrinsics;  // default fx=fy=W/2, centered
  double sobel_saturation = 1.0;
  bool binarize_boundary = false;
  double binarize_threshold = 0.25;
};

/// Writes depth as 16-bit PNG. Values quantize to 1/4000 m; anything below
/// half a quantum (1/8000 m) rounds to 0 and will reload as missing.
template <typename T>
void save_depth(const DepthMap<T>& depth, const std::string& path) {
  Grid<std::uint16_t> g(depth.height(), depth.width());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = static_cast<double>(depth.values.vec()[i]);
    if (!std::isfinite(v) || v < 0.0 || v > kMaxStorableDepth)
      raise<RangeError>("save_depth: value ", v, " outside [0, ",
                        kMaxStorableDepth, "] m");
    g.vec()[i] = static_cast<std::uint16_t>(std::lround(v * kDepthUnitsPerMeter));
  }
  png_io::write_gray16(path, g);
}

template <typename T>
DepthMap<T> load_depth(const std::string& path) {
  Grid<std::uint16_t> g = png_io::read_gray16(path);
  DepthMap<T> d(g.height(), g.width());
  for (std::size_t i = 0; i < g.size(); ++i)
    d.values.vec()[i] = static_cast<T>(g.vec()[i] / kDepthUnitsPerMeter);
  return d;
}

template <typename T>
void save_rgb(const RgbImage<T>& rgb, const std::string& path) {
  Tensor<std::uint8_t> t(3, rgb.height(), rgb.width());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = static_cast<double>(rgb.values.vec()[i]);
    t.vec()[i] = static_cast<std::uint8_t>(
        std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  }
  png_io::write_rgb8(path, t);
}

template <typename T>
RgbImage<T> load_rgb(const std::string& path) {
  Tensor<std::uint8_t> t = png_io::read_rgb8(path);
  RgbImage<T> rgb(t.height(), t.width());
  for (std::size_t i = 0; i < t.size(); ++i)
    rgb.values.vec()[i] = static_cast<T>(t.vec()[i] / 255.0);
  return rgb;
}

/// Loads one RGB / raw-depth / ground-truth-depth triplet. Ground-truth
/// normals (central differences) and boundary (Sobel) are derived on the fly
/// from the ground-truth depth.
template <typename T>
Sample<T> load_sample(const std::string& rgb_path, const std::string& raw_path,
                      const std::string& gt_path, const LoadOptions& opts = {}) {
  Sample<T> s;
  s.rgb = load_rgb<T>(rgb_path);
  s.raw_depth = load_depth<T>(raw_path);
  s.gt_depth = load_depth<T>(gt_path);
  s.id = std::filesystem::path(rgb_path).stem().string();

  auto require_shape = [&](int h, int w, const std::string& path) {
    if (h != s.rgb.height() || w != s.rgb.width())
      raise<ShapeError>("load_sample: '", path, "' is ", h, "x", w, " but '",
                        rgb_path, "' is ", s.rgb.height(), "x", s.rgb.width());
  };
  require_shape(s.raw_depth.height(), s.raw_depth.width(), raw_path);
  require_shape(s.gt_depth.height(), s.gt_depth.width(), gt_path);

  const CameraIntrinsics k =
      opts.intrinsics ? *opts.intrinsics
                      : CameraIntrinsics::defaulted(s.rgb.width(), s.rgb.height());
  s.gt_normals = normals_from_depth(s.gt_depth, k);
  BoundaryMap<T> b =
      edges::sobel_boundary(s.gt_depth, static_cast<T>(opts.sobel_saturation));
  s.gt_boundary = opts.binarize_boundary
                      ? edges::binarize(b, static_cast<T>(opts.binarize_threshold))
                      : b;
  return s;
}

struct ManifestEntry {
  std::string rgb, raw, gt;
};

/// Manifest format: one sample per line, "rgb_path TAB raw_path TAB gt_path".
/// Relative paths are resolved against the manifest's directory.
inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise<IoError>("cannot open manifest '", path, "'");
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos ||
        line.find('\t', t2 + 1) != std::string::npos)
      raise<FormatError>("manifest '", path, "' line ", lineno,
                         ": expected exactly 3 tab-separated paths");
    entries.push_back({resolve(line.substr(0, t1)),
                       resolve(line.substr(t1 + 1, t2 - t1 - 1)),
                       resolve(line.substr(t2 + 1))});
  }
  return entries;
}

template <typename T>
std::vector<Sample<T>> load_dataset(const std::string& manifest,
                                    const LoadOptions& opts = {}) {
  std::vector<Sample<T>> samples;
  for (const ManifestEntry& e : read_manifest(manifest))
    samples.push_back(load_sample<T>(e.rgb, e.raw, e.gt, opts));
  return samples;
}

/// Emits `count` synthetic samples as PNG triplets plus a manifest, so
/// synthetic and real data flow through the same loader. Returns the manifest
/// path.
template <typename T>
std::string generate_dataset(const std::string& out_dir, std::uint64_t seed,
                             int count, int size,
                             const synth::SceneConfig& cfg = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) raise<IoError>("cannot write manifest in '", out_dir, "'");
  for (int i = 0; i < count; ++i) {
    Sample<T> s = synth::make_synthetic_scene<T>(seed + static_cast<std::uint64_t>(i),
                                                 size, size, cfg);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "sample_%06d", i);
    const std::string rgb = std::string(stem) + "_rgb.png";
    const std::string raw = std::string(stem) + "_raw.png";
    const std::string gt = std::string(stem) + "_gt.png";
    save_rgb(s.rgb, (dir / rgb).string());
    save_depth(s.raw_depth, (dir / raw).string());
    save_depth(s.gt_depth, (dir / gt).string());
    manifest << rgb << '\t' << raw << '\t' << gt << '\n';
  }
  return (dir / "manifest.txt").string();
}

}  // namespace depthfill
