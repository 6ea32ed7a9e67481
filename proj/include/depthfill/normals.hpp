#pragma once

#include <array>
#include <cmath>

#include "depthfill/types.hpp"

namespace depthfill {

/// Surface normals from depth by central differences on unprojected points.
/// A pixel needs a valid depth itself and at all four axis neighbors;
/// otherwise it is marked invalid. Normals are unit length and oriented
/// toward the camera (flipped so the dot product with the viewing ray is
/// negative).
template <typename T>
NormalMap<T> normals_from_depth(const DepthMap<T>& depth,
                                const CameraIntrinsics& k) {
  const int h = depth.height(), w = depth.width();
  k.validate(w, h);
  NormalMap<T> out(h, w);

  auto point = [&](int y, int x) -> std::array<double, 3> {
    const double z = static_cast<double>(depth(y, x));
    return {(x - k.cx) / k.fx * z, (y - k.cy) / k.fy * z, z};
  };

  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      if (!(depth(y, x) > T(0)) || !(depth(y, x - 1) > T(0)) ||
          !(depth(y, x + 1) > T(0)) || !(depth(y - 1, x) > T(0)) ||
          !(depth(y + 1, x) > T(0)))
        continue;
      const auto pr = point(y, x + 1), pl = point(y, x - 1);
      const auto pd = point(y + 1, x), pu = point(y - 1, x);
      const double tx[3] = {pr[0] - pl[0], pr[1] - pl[1], pr[2] - pl[2]};
      const double ty[3] = {pd[0] - pu[0], pd[1] - pu[1], pd[2] - pu[2]};
      double n[3] = {tx[1] * ty[2] - tx[2] * ty[1],
                     tx[2] * ty[0] - tx[0] * ty[2],
                     tx[0] * ty[1] - tx[1] * ty[0]};
      const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
      if (!(len > 1e-12)) continue;  // degenerate tangents: leave invalid
      for (double& v : n) v /= len;
      // Orient toward the camera along this pixel's viewing ray.
      const double ray[3] = {(x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0};
      if (n[0] * ray[0] + n[1] * ray[1] + n[2] * ray[2] > 0.0)
        for (double& v : n) v = -v;
      out.values(0, y, x) = static_cast<T>(n[0]);
      out.values(1, y, x) = static_cast<T>(n[1]);
      out.values(2, y, x) = static_cast<T>(n[2]);
      out.validity(y, x) = 1;
    }
  }
  return out;
}

}  // namespace depthfill
