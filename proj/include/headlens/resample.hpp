#pragma once

// Bicubic resampling with a Catmull-Rom kernel (a = -0.5), half-pixel centers and
// edge-replicate padding.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "headlens/error.hpp"
#include "headlens/matrix.hpp"

namespace headlens {

inline constexpr double kCubicA = -0.5;

inline double cubic_weight(double x) {
  const double ax = std::abs(x);
  if (ax <= 1.0) return ((kCubicA + 2.0) * ax - (kCubicA + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((kCubicA * ax - 5.0 * kCubicA) * ax + 8.0 * kCubicA) * ax - 4.0 * kCubicA;
  return 0.0;
}

namespace detail {

struct CubicTaps {
  std::array<std::size_t, 4> index;
  std::array<double, 4> weight;
};

// Source taps for every destination coordinate along one axis.
inline std::vector<CubicTaps> cubic_taps(std::size_t src, std::size_t dst) {
  std::vector<CubicTaps> taps(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  const auto last = static_cast<std::ptrdiff_t>(src) - 1;
  for (std::size_t o = 0; o < dst; ++o) {
    const double pos = (static_cast<double>(o) + 0.5) * scale - 0.5;
    const double base = std::floor(pos);
    const double frac = pos - base;
    for (int k = 0; k < 4; ++k) {
      const auto i = static_cast<std::ptrdiff_t>(base) - 1 + k;
      taps[o].index[k] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, last));
      taps[o].weight[k] = cubic_weight(frac - static_cast<double>(k - 1));
    }
  }
  return taps;
}

}  // namespace detail

/// Resize a (rows x cols) image to (out_rows x out_cols). Separable: columns then rows.
/// Output is clamped below at 0. Identity sizes return an exact copy.
inline Matrix bicubic_resize(const Matrix& src, std::size_t out_rows, std::size_t out_cols) {
  if (src.rows() == 0 || src.cols() == 0 || out_rows == 0 || out_cols == 0) {
    throw ValidationError("bicubic resize needs non-empty source and target");
  }
  if (out_rows == src.rows() && out_cols == src.cols()) return src;

  const auto xt = detail::cubic_taps(src.cols(), out_cols);
  const auto yt = detail::cubic_taps(src.rows(), out_rows);

  Matrix horizontal(src.rows(), out_cols);
  for (std::size_t y = 0; y < src.rows(); ++y) {
    const auto in = src.row(y);
    auto out = horizontal.row(y);
    for (std::size_t x = 0; x < out_cols; ++x) {
      const auto& t = xt[x];
      out[x] = t.weight[0] * in[t.index[0]] + t.weight[1] * in[t.index[1]] +
               t.weight[2] * in[t.index[2]] + t.weight[3] * in[t.index[3]];
    }
  }

  Matrix out(out_rows, out_cols);
  for (std::size_t y = 0; y < out_rows; ++y) {
    const auto& t = yt[y];
    const auto r0 = horizontal.row(t.index[0]);
    const auto r1 = horizontal.row(t.index[1]);
    const auto r2 = horizontal.row(t.index[2]);
    const auto r3 = horizontal.row(t.index[3]);
    auto dst = out.row(y);
    for (std::size_t x = 0; x < out_cols; ++x) {
      const double v = t.weight[0] * r0[x] + t.weight[1] * r1[x] + t.weight[2] * r2[x] +
                       t.weight[3] * r3[x];
      dst[x] = v < 0.0 ? 0.0 : v;
    }
  }
  return out;
}

/// Upscale a square r_h x r_h map to target_r x target_r. Downscaling is rejected.
inline Matrix bicubic_upscale(const Matrix& map2d, std::size_t target_r) {
  if (map2d.rows() != map2d.cols() || map2d.rows() == 0) {
    throw ShapeError("bicubic_upscale expects a non-empty square map, got " + shape_string(map2d));
  }
  if (target_r < map2d.rows()) {
    throw ValidationError("downscale not supported: " + std::to_string(map2d.rows()) + " -> " +
                          std::to_string(target_r));
  }
  return bicubic_resize(map2d, target_r, target_r);
}

}  // namespace headlens
