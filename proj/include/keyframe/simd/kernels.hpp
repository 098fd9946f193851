#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference version and,
// on x86-64, an AVX2/FMA version; the active table is picked once at runtime
// from CPUID (override with KEYFRAME_ISA=scalar|avx2 or set_active_isa()).
//
// Equivalence contract between variants:
//   - warp_bilinear: bit-identical (same float op sequence, no FMA).
//   - double/float reductions: equal up to summation-order rounding.

#include <cassert>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace keyframe::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;
std::vector<Isa> supported_isas();

/// Maps a destination pixel (x, y) to the source position
/// (xx*x + xy*y + x0, yx*x + yy*y + y0), pixel-index coordinates.
struct AffineMap {
  float xx = 1.0f, xy = 0.0f, x0 = 0.0f;
  float yx = 0.0f, yy = 1.0f, y0 = 0.0f;
};

enum class Border {
  Zero,       // neighbours outside the source read as 0
  Replicate,  // neighbours clamp to the nearest edge pixel
};

struct Kernels {
  Isa isa;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[r] += sum_c A[r, c] * x[c]; A row-major rows x cols
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y[c] += sum_r A[r, c] * x[r]
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // A[r, c] += u[r] * v[c]
  void (*ger)(double* a, std::size_t rows, std::size_t cols, const double* u, const double* v);

  float (*dot_f32)(const float* a, const float* b, std::size_t n);
  void (*gemv_f32)(const float* a, std::size_t rows, std::size_t cols, const float* x, float* y);
  // C[m, n] += sum_k A[m, k] * B[k, n]; all row-major
  void (*gemm_f32)(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n);

  // dst[y, x] = bilinear sample of src at map(x, y), clamped to [0,1].
  void (*warp_bilinear)(const float* src, std::size_t src_w, std::size_t src_h, float* dst, std::size_t dst_w,
                        std::size_t dst_h, const AffineMap& map, Border border);
};

const Kernels& kernels_for(Isa isa);  // throws keyframe::Error if unsupported
const Kernels& active() noexcept;
Isa active_isa() noexcept;
void set_active_isa(Isa isa);

// Span front-ends over the active table.

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void gemv(std::span<const double> a, std::size_t rows, std::span<const double> x, std::span<double> y) {
  assert(a.size() == rows * x.size() && y.size() == rows);
  active().gemv(a.data(), rows, x.size(), x.data(), y.data());
}

inline void gemv_t(std::span<const double> a, std::size_t rows, std::span<const double> x, std::span<double> y) {
  assert(x.size() == rows && a.size() == rows * y.size());
  active().gemv_t(a.data(), rows, y.size(), x.data(), y.data());
}

inline void ger(std::span<double> a, std::span<const double> u, std::span<const double> v) {
  assert(a.size() == u.size() * v.size());
  active().ger(a.data(), u.size(), v.size(), u.data(), v.data());
}

inline void gemv_f32(std::span<const float> a, std::size_t rows, std::span<const float> x, std::span<float> y) {
  assert(a.size() == rows * x.size() && y.size() == rows);
  active().gemv_f32(a.data(), rows, x.size(), x.data(), y.data());
}

namespace detail {
extern const Kernels kScalarKernels;
#if defined(__x86_64__) || defined(_M_X64)
extern const Kernels kAvx2Kernels;
#endif
}  // namespace detail

}  // namespace keyframe::simd
