#pragma once

// Reference bilinear sampler shared by the scalar kernel and the SIMD tails.
// The AVX2 body reproduces exactly this sequence of float operations; the
// build disables FP contraction so neither side fuses multiply-adds.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "keyframe/simd/kernels.hpp"

namespace keyframe::simd::detail {

// Source coordinates are clamped to [-2, size + 1] before flooring. In that
// band Zero-border samples are already all-outside and Replicate samples are
// already edge-clamped, so results are unchanged and the int cast is safe.
inline float clamp_coord(float v, std::size_t size) {
  const float lo = -2.0f;
  const float hi = static_cast<float>(size) + 1.0f;
  return std::min(std::max(v, lo), hi);
}

inline float fetch(const float* src, std::size_t w, std::size_t h, int x, int y, Border border) {
  const int iw = static_cast<int>(w);
  const int ih = static_cast<int>(h);
  if (border == Border::Replicate) {
    x = std::clamp(x, 0, iw - 1);
    y = std::clamp(y, 0, ih - 1);
    return src[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  }
  if (x < 0 || y < 0 || x >= iw || y >= ih) return 0.0f;
  return src[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
}

inline float sample_bilinear(const float* src, std::size_t w, std::size_t h, float x, float y, const AffineMap& m,
                             Border border) {
  float sx = (m.xx * x + m.xy * y) + m.x0;
  float sy = (m.yx * x + m.yy * y) + m.y0;
  sx = clamp_coord(sx, w);
  sy = clamp_coord(sy, h);
  const float x0f = std::floor(sx);
  const float y0f = std::floor(sy);
  const float ax = sx - x0f;
  const float ay = sy - y0f;
  const int x0 = static_cast<int>(x0f);
  const int y0 = static_cast<int>(y0f);

  const float p00 = fetch(src, w, h, x0, y0, border);
  const float p01 = fetch(src, w, h, x0 + 1, y0, border);
  const float p10 = fetch(src, w, h, x0, y0 + 1, border);
  const float p11 = fetch(src, w, h, x0 + 1, y0 + 1, border);

  const float bx = 1.0f - ax;
  const float by = 1.0f - ay;
  const float top = p00 * bx + p01 * ax;
  const float bottom = p10 * bx + p11 * ax;
  const float v = top * by + bottom * ay;
  return std::min(std::max(v, 0.0f), 1.0f);
}

}  // namespace keyframe::simd::detail
