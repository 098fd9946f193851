// Scalar reference kernels. These define the semantics the SIMD variants are
// tested against; keep them straightforward.

#include <algorithm>
#include <cmath>

#include "keyframe/simd/kernels.hpp"
#include "warp_common.hpp"

namespace keyframe::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot_scalar(a + r * cols, x, cols);
}

void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], a + r * cols, y, cols);
}

void ger_scalar(double* a, std::size_t rows, std::size_t cols, const double* u, const double* v) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(u[r], v, a + r * cols, cols);
}

float dot_f32_scalar(const float* a, const float* b, std::size_t n) {
  float s = 0.0f;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void gemv_f32_scalar(const float* a, std::size_t rows, std::size_t cols, const float* x, float* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot_f32_scalar(a + r * cols, x, cols);
}

void gemm_f32_scalar(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = a[i * k + p];
      if (av == 0.0f) continue;
      const float* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void warp_bilinear_scalar(const float* src, std::size_t src_w, std::size_t src_h, float* dst, std::size_t dst_w,
                          std::size_t dst_h, const AffineMap& map, Border border) {
  for (std::size_t y = 0; y < dst_h; ++y) {
    const float fy = static_cast<float>(y);
    for (std::size_t x = 0; x < dst_w; ++x) {
      const float fx = static_cast<float>(x);
      dst[y * dst_w + x] = detail::sample_bilinear(src, src_w, src_h, fx, fy, map, border);
    }
  }
}

}  // namespace

namespace detail {

const Kernels kScalarKernels = {
    Isa::Scalar,    dot_scalar,     axpy_scalar,     gemv_scalar,     gemv_t_scalar,
    ger_scalar,     dot_f32_scalar, gemv_f32_scalar, gemm_f32_scalar, warp_bilinear_scalar,
};

}  // namespace detail
}  // namespace keyframe::simd
