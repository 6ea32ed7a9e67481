#pragma once

#include <cmath>

#include "depthfill/errors.hpp"
#include "depthfill/tensor.hpp"

namespace depthfill {

/// Uniform-window SSIM over inputs expected in [0, 1].
/// c1/c2 follow (0.01 L)^2, (0.03 L)^2 with unit dynamic range.
struct SsimOptions {
  int window = 7;
  double c1 = 0.0001;
  double c2 = 0.0009;

  void validate() const {
    if (window < 3 || window % 2 == 0)
      raise<ConfigError>("SSIM window must be odd and >= 3, got ", window);
  }
};

/// Mean local SSIM over all fully interior window positions. When gx is
/// non-null it receives d(mean SSIM)/dx.
template <typename T>
double ssim_index(const Grid<T>& x, const Grid<T>& y, const SsimOptions& opt = {},
                  Grid<double>* gx = nullptr) {
  opt.validate();
  if (!x.same_shape(y))
    raise<ShapeError>("ssim: shapes differ: ", x.height(), "x", x.width(), " vs ",
                      y.height(), "x", y.width());
  const int h = x.height(), w = x.width(), win = opt.window;
  if (h < win || w < win)
    raise<ShapeError>("ssim: image ", h, "x", w, " smaller than window ", win);
  const int ph = h - win + 1, pw = w - win + 1;
  const double n = static_cast<double>(win) * win;
  const double positions = static_cast<double>(ph) * pw;
  if (gx) {
    *gx = Grid<double>(h, w, 0.0);
  }

  double total = 0.0;
  for (int oy = 0; oy < ph; ++oy) {
    for (int ox = 0; ox < pw; ++ox) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int ky = 0; ky < win; ++ky)
        for (int kx = 0; kx < win; ++kx) {
          const double a = static_cast<double>(x(oy + ky, ox + kx));
          const double b = static_cast<double>(y(oy + ky, ox + kx));
          sx += a;
          sy += b;
          sxx += a * a;
          syy += b * b;
          sxy += a * b;
        }
      const double mx = sx / n, my = sy / n;
      const double vxx = sxx / n - mx * mx;
      const double vyy = syy / n - my * my;
      const double vxy = sxy / n - mx * my;
      const double a1 = 2.0 * (mx * my) + opt.c1;
      const double a2 = 2.0 * vxy + opt.c2;
      const double b1 = mx * mx + my * my + opt.c1;
      const double b2 = vxx + vyy + opt.c2;
      total += (a1 * a2) / (b1 * b2);

      if (gx) {
        const double inv_bb = 1.0 / (b1 * b2);
        const double s_a1 = a2 * inv_bb;                  // dS/dA1
        const double s_a2 = a1 * inv_bb;                  // dS/dA2
        const double s_b1 = -(a1 * a2) * inv_bb / b1;     // dS/dB1
        const double s_b2 = -(a1 * a2) * inv_bb / b2;     // dS/dB2
        // Partials w.r.t. window statistics (mx, sxx/n, sxy/n).
        const double d_mx =
            s_a1 * 2.0 * my + s_b1 * 2.0 * mx + s_a2 * (-2.0 * my) + s_b2 * (-2.0 * mx);
        const double d_mxx = s_b2;        // via vxx = sxx/n - mx^2
        const double d_mxy = s_a2 * 2.0;  // via vxy = sxy/n - mx*my
        const double scale = 1.0 / (positions * n);
        for (int ky = 0; ky < win; ++ky)
          for (int kx = 0; kx < win; ++kx) {
            const double a = static_cast<double>(x(oy + ky, ox + kx));
            const double b = static_cast<double>(y(oy + ky, ox + kx));
            (*gx)(oy + ky, ox + kx) += scale * (d_mx + d_mxx * 2.0 * a + d_mxy * b);
          }
      }
    }
  }
  return total / positions;
}

}  // namespace depthfill
