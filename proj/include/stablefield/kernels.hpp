#pragma once

#include <cstddef>

namespace stablefield::kernels {

/// The data-parallel inner loops of the library: fractional power transforms
/// and masked reductions over discretization cells or sample arrays.
///
/// `scalar()` is the reference implementation (plain loops over std::pow and
/// friends). `avx2()` is an AVX2+FMA variant that must agree with the scalar
/// kernels to tight tolerance; tests/test_kernels.cpp enforces the
/// equivalence. `active()` returns the variant selected at startup: the best
/// the CPU supports, or the one named in the STABLEFIELD_SIMD environment
/// variable ("scalar" or "avx2").
struct Ops {
  const char* name;

  /// sum_k |x_k|^p
  double (*abs_pow_sum)(const double* x, std::size_t n, double p);

  /// out_k = sign(x_k) * |x_k|^p
  void (*signed_pow)(const double* x, std::size_t n, double p, double* out);

  /// sum_k a_k * sign(x_k) * |x_k|^p
  double (*dot_signed_pow)(const double* a, const double* x, std::size_t n, double p);

  /// sum_k m_k * 1{lo <= c_k <= hi}
  double (*masked_window_sum)(const double* c, const double* m, std::size_t n,
                              double lo, double hi);

  /// sum_k m_k * 1{lox <= cx_k <= hix, loy <= cy_k <= hiy}
  double (*masked_window_sum2)(const double* cx, const double* cy, const double* m,
                               std::size_t n, double lox, double hix, double loy,
                               double hiy);
};

const Ops& scalar();

/// nullptr when the CPU (or build) lacks AVX2+FMA.
const Ops* avx2();

const Ops& active();

}  // namespace stablefield::kernels
