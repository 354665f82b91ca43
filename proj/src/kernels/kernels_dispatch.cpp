#include "stablefield/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace stablefield::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops& select() {
  const char* forced = std::getenv("STABLEFIELD_SIMD");
  if (forced != nullptr && *forced != '\0') {
    if (std::strcmp(forced, "scalar") == 0) return scalar();
    if (std::strcmp(forced, "avx2") == 0) {
      const Ops* ops = avx2();
      if (ops == nullptr || !cpu_has_avx2())
        throw std::runtime_error("STABLEFIELD_SIMD=avx2 but AVX2+FMA is unavailable");
      return *ops;
    }
    throw std::runtime_error(std::string("unknown STABLEFIELD_SIMD value: ") + forced);
  }
  if (const Ops* ops = avx2(); ops != nullptr && cpu_has_avx2()) return *ops;
  return scalar();
}

}  // namespace

const Ops& active() {
  static const Ops& ops = select();
  return ops;
}

}  // namespace stablefield::kernels
