// AVX2/FMA kernels. Compiled into every x86-64 build through per-function
// target attributes and only reached when CPUID reports avx2 and fma.

#include "keyframe/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "warp_common.hpp"

#define KF_AVX2 __attribute__((target("avx2,fma")))

namespace keyframe::simd {
namespace {

KF_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

KF_AVX2 inline float hsum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

KF_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

KF_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

KF_AVX2 void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot_avx2(a + r * cols, x, cols);
}

KF_AVX2 void gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(x[r], a + r * cols, y, cols);
}

KF_AVX2 void ger_avx2(double* a, std::size_t rows, std::size_t cols, const double* u, const double* v) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(u[r], v, a + r * cols, cols);
}

KF_AVX2 float dot_f32_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float s = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

KF_AVX2 void gemv_f32_avx2(const float* a, std::size_t rows, std::size_t cols, const float* x, float* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot_f32_avx2(a + r * cols, x, cols);
}

KF_AVX2 void gemm_f32_avx2(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = a[i * k + p];
      if (av == 0.0f) continue;
      const __m256 va = _mm256_set1_ps(av);
      const float* brow = b + p * n;
      std::size_t j = 0;
      for (; j + 8 <= n; j += 8) {
        _mm256_storeu_ps(crow + j, _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j), _mm256_loadu_ps(crow + j)));
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

struct WarpLanes {
  __m256i width, height, zero, wmax, hmax;
};

KF_AVX2 inline __m256 gather_tap(const float* src, const WarpLanes& lanes, __m256i xi, __m256i yi, Border border) {
  if (border == Border::Replicate) {
    xi = _mm256_min_epi32(_mm256_max_epi32(xi, lanes.zero), lanes.wmax);
    yi = _mm256_min_epi32(_mm256_max_epi32(yi, lanes.zero), lanes.hmax);
    const __m256i idx = _mm256_add_epi32(_mm256_mullo_epi32(yi, lanes.width), xi);
    return _mm256_i32gather_ps(src, idx, 4);
  }
  const __m256i minus1 = _mm256_set1_epi32(-1);
  const __m256i inside = _mm256_and_si256(
      _mm256_and_si256(_mm256_cmpgt_epi32(xi, minus1), _mm256_cmpgt_epi32(yi, minus1)),
      _mm256_and_si256(_mm256_cmpgt_epi32(lanes.width, xi), _mm256_cmpgt_epi32(lanes.height, yi)));
  const __m256i idx = _mm256_and_si256(_mm256_add_epi32(_mm256_mullo_epi32(yi, lanes.width), xi), inside);
  return _mm256_mask_i32gather_ps(_mm256_setzero_ps(), src, idx, _mm256_castsi256_ps(inside), 4);
}

KF_AVX2 void warp_bilinear_avx2(const float* src, std::size_t src_w, std::size_t src_h, float* dst, std::size_t dst_w,
                                std::size_t dst_h, const AffineMap& m, Border border) {
  const WarpLanes lanes{_mm256_set1_epi32(static_cast<int>(src_w)), _mm256_set1_epi32(static_cast<int>(src_h)),
                        _mm256_setzero_si256(), _mm256_set1_epi32(static_cast<int>(src_w) - 1),
                        _mm256_set1_epi32(static_cast<int>(src_h) - 1)};
  const __m256 mxx = _mm256_set1_ps(m.xx), mxy = _mm256_set1_ps(m.xy), mx0 = _mm256_set1_ps(m.x0);
  const __m256 myx = _mm256_set1_ps(m.yx), myy = _mm256_set1_ps(m.yy), my0 = _mm256_set1_ps(m.y0);
  const __m256 xlo = _mm256_set1_ps(-2.0f), xhi = _mm256_set1_ps(static_cast<float>(src_w) + 1.0f);
  const __m256 ylo = _mm256_set1_ps(-2.0f), yhi = _mm256_set1_ps(static_cast<float>(src_h) + 1.0f);
  const __m256 one = _mm256_set1_ps(1.0f), zero = _mm256_setzero_ps();
  const __m256 lane_offsets = _mm256_setr_ps(0, 1, 2, 3, 4, 5, 6, 7);
  const __m256i one_i = _mm256_set1_epi32(1);

  for (std::size_t y = 0; y < dst_h; ++y) {
    const float fy = static_cast<float>(y);
    const __m256 vy = _mm256_set1_ps(fy);
    std::size_t x = 0;
    for (; x + 8 <= dst_w; x += 8) {
      const __m256 vx = _mm256_add_ps(_mm256_set1_ps(static_cast<float>(x)), lane_offsets);
      __m256 sx = _mm256_add_ps(_mm256_add_ps(_mm256_mul_ps(mxx, vx), _mm256_mul_ps(mxy, vy)), mx0);
      __m256 sy = _mm256_add_ps(_mm256_add_ps(_mm256_mul_ps(myx, vx), _mm256_mul_ps(myy, vy)), my0);
      sx = _mm256_min_ps(_mm256_max_ps(sx, xlo), xhi);
      sy = _mm256_min_ps(_mm256_max_ps(sy, ylo), yhi);
      const __m256 x0f = _mm256_floor_ps(sx);
      const __m256 y0f = _mm256_floor_ps(sy);
      const __m256 ax = _mm256_sub_ps(sx, x0f);
      const __m256 ay = _mm256_sub_ps(sy, y0f);
      const __m256i x0 = _mm256_cvttps_epi32(x0f);
      const __m256i y0 = _mm256_cvttps_epi32(y0f);
      const __m256i x1 = _mm256_add_epi32(x0, one_i);
      const __m256i y1 = _mm256_add_epi32(y0, one_i);

      const __m256 p00 = gather_tap(src, lanes, x0, y0, border);
      const __m256 p01 = gather_tap(src, lanes, x1, y0, border);
      const __m256 p10 = gather_tap(src, lanes, x0, y1, border);
      const __m256 p11 = gather_tap(src, lanes, x1, y1, border);

      const __m256 bx = _mm256_sub_ps(one, ax);
      const __m256 by = _mm256_sub_ps(one, ay);
      const __m256 top = _mm256_add_ps(_mm256_mul_ps(p00, bx), _mm256_mul_ps(p01, ax));
      const __m256 bottom = _mm256_add_ps(_mm256_mul_ps(p10, bx), _mm256_mul_ps(p11, ax));
      __m256 v = _mm256_add_ps(_mm256_mul_ps(top, by), _mm256_mul_ps(bottom, ay));
      v = _mm256_min_ps(_mm256_max_ps(v, zero), one);
      _mm256_storeu_ps(dst + y * dst_w + x, v);
    }
    for (; x < dst_w; ++x) {
      dst[y * dst_w + x] = detail::sample_bilinear(src, src_w, src_h, static_cast<float>(x), fy, m, border);
    }
  }
}

}  // namespace

namespace detail {

const Kernels kAvx2Kernels = {
    Isa::Avx2,    dot_avx2,     axpy_avx2,     gemv_avx2,     gemv_t_avx2,
    ger_avx2,     dot_f32_avx2, gemv_f32_avx2, gemm_f32_avx2, warp_bilinear_avx2,
};

}  // namespace detail
}  // namespace keyframe::simd

#endif
