#include <atomic>
#include <cstdlib>
#include <string>

#include "keyframe/core.hpp"
#include "keyframe/simd/kernels.hpp"

namespace keyframe::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* pick_default() {
  const char* env = std::getenv("KEYFRAME_ISA");
  if (env != nullptr) {
    const std::string want(env);
    if (want == "scalar") return &detail::kScalarKernels;
    if (want == "avx2" && isa_supported(Isa::Avx2)) return &kernels_for(Isa::Avx2);
  }
  if (isa_supported(Isa::Avx2)) return &kernels_for(Isa::Avx2);
  return &detail::kScalarKernels;
}

std::atomic<const Kernels*>& active_slot() noexcept {
  static std::atomic<const Kernels*> slot{pick_default()};
  return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2: {
      static const bool has = cpu_has_avx2();
      return has;
    }
  }
  return false;
}

std::vector<Isa> supported_isas() {
  std::vector<Isa> out{Isa::Scalar};
  if (isa_supported(Isa::Avx2)) out.push_back(Isa::Avx2);
  return out;
}

const Kernels& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw Error(ErrorCode::InvalidArgument, "instruction set " + std::string(isa_name(isa)) + " not supported here");
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::Avx2) return detail::kAvx2Kernels;
#endif
  return detail::kScalarKernels;
}

const Kernels& active() noexcept { return *active_slot().load(std::memory_order_acquire); }

Isa active_isa() noexcept { return active().isa; }

void set_active_isa(Isa isa) { active_slot().store(&kernels_for(isa), std::memory_order_release); }

}  // namespace keyframe::simd
