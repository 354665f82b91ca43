#include "stablefield/kernels.hpp"

// AVX2+FMA variants of the inner loops. This translation unit is compiled
// with -mavx2 -mfma; callers must only reach it through the dispatch table,
// which checks CPU support at startup.
//
// |x|^p is computed as exp(p*log|x|) with Cody-Waite reductions and
// polynomial cores sized for < ~4 ulp before the p*log amplification.
// Subnormal and non-finite lanes fall back to libm so the variant agrees
// with the scalar reference everywhere; see tests/test_kernels.cpp.

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cfloat>
#include <cmath>
#include <cstdint>
#include <limits>

namespace stablefield::kernels {
namespace {

inline __m256d i64_to_f64(__m256i v) {
  // Valid for |v| < 2^51.
  const __m256i magic = _mm256_set1_epi64x(0x4338000000000000LL);
  return _mm256_sub_pd(_mm256_castsi256_pd(_mm256_add_epi64(v, magic)),
                       _mm256_set1_pd(6755399441055744.0));
}

// log(x) for normal positive finite x.
inline __m256d v_log(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  __m256i e = _mm256_sub_epi64(_mm256_srli_epi64(bits, 52), _mm256_set1_epi64x(1023));
  const __m256i mant = _mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL));
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(mant, _mm256_set1_epi64x(0x3FF0000000000000LL)));

  // Renormalize m into [sqrt(1/2), sqrt(2)).
  const __m256d gt = _mm256_cmp_pd(m, _mm256_set1_pd(1.4142135623730951), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), gt);
  e = _mm256_add_epi64(e, _mm256_and_si256(_mm256_castpd_si256(gt), _mm256_set1_epi64x(1)));
  const __m256d ed = i64_to_f64(e);

  // log(m) = 2 atanh(s), s = (m-1)/(m+1), |s| <= 0.1716.
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d z = _mm256_mul_pd(s, s);
  __m256d p = _mm256_set1_pd(2.0 / 21.0);
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(2.0 / 19.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(2.0 / 17.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(2.0 / 15.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(2.0 / 13.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(2.0 / 11.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(2.0 / 9.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(2.0 / 7.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(2.0 / 5.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(2.0 / 3.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(2.0));

  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d r = _mm256_fmadd_pd(s, p, _mm256_mul_pd(ed, ln2_lo));
  return _mm256_fmadd_pd(ed, ln2_hi, r);
}

inline __m256d v_exp(__m256d t) {
  const __m256d big = _mm256_cmp_pd(t, _mm256_set1_pd(709.0), _CMP_GT_OQ);
  const __m256d small = _mm256_cmp_pd(t, _mm256_set1_pd(-745.0), _CMP_LT_OQ);
  t = _mm256_min_pd(_mm256_max_pd(t, _mm256_set1_pd(-745.0)), _mm256_set1_pd(709.0));

  const __m256d kd = _mm256_round_pd(
      _mm256_mul_pd(t, _mm256_set1_pd(1.4426950408889634074)),
      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  __m256d r = _mm256_fnmadd_pd(kd, ln2_hi, t);
  r = _mm256_fnmadd_pd(kd, ln2_lo, r);

  // exp(r) on |r| <= ln2/2 + eps, Taylor through r^13.
  __m256d p = _mm256_set1_pd(1.6059043836821614599e-10);  // 1/13!
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.0876756987868098979e-09));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.5052108385441718775e-08));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985890653e-07));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985892511e-06));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.4801587301587301566e-05));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.9841269841269841253e-04));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.3888888888888889419e-03));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(8.3333333333333332177e-03));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(4.1666666666666664354e-02));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.6666666666666665741e-01));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // Scale by 2^k in two factors so extreme k stays in the normal range.
  const __m128i k32 = _mm256_cvtpd_epi32(kd);
  const __m128i k1_32 = _mm_srai_epi32(k32, 1);
  const __m128i k2_32 = _mm_sub_epi32(k32, k1_32);
  const __m256i bias = _mm256_set1_epi64x(1023);
  const __m256d s1 = _mm256_castsi256_pd(
      _mm256_slli_epi64(_mm256_add_epi64(_mm256_cvtepi32_epi64(k1_32), bias), 52));
  const __m256d s2 = _mm256_castsi256_pd(
      _mm256_slli_epi64(_mm256_add_epi64(_mm256_cvtepi32_epi64(k2_32), bias), 52));
  __m256d out = _mm256_mul_pd(_mm256_mul_pd(p, s1), s2);

  out = _mm256_blendv_pd(out, _mm256_setzero_pd(), small);
  out = _mm256_blendv_pd(out, _mm256_set1_pd(std::numeric_limits<double>::infinity()), big);
  return out;
}

const __m256d kAbsMask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
const __m256d kSignMask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x8000000000000000LL));

// |x|^p for lanes whose |x| is zero or a normal finite double; lanes outside
// that set (subnormal, inf, nan) are flagged for a libm fallback.
inline bool v_abs_pow(__m256d x, double p, __m256d& out) {
  const __m256d a = _mm256_and_pd(x, kAbsMask);
  const __m256d zero = _mm256_cmp_pd(a, _mm256_setzero_pd(), _CMP_EQ_OQ);
  const __m256d subnormal = _mm256_andnot_pd(
      zero, _mm256_cmp_pd(a, _mm256_set1_pd(DBL_MIN), _CMP_LT_OQ));
  const __m256d nonfinite =
      _mm256_cmp_pd(a, _mm256_set1_pd(DBL_MAX), _CMP_NLE_UQ);  // inf or nan
  if (_mm256_movemask_pd(_mm256_or_pd(subnormal, nonfinite)) != 0) return false;

  const __m256d safe = _mm256_blendv_pd(a, _mm256_set1_pd(1.0), zero);
  __m256d r = v_exp(_mm256_mul_pd(_mm256_set1_pd(p), v_log(safe)));
  out = _mm256_andnot_pd(zero, r);
  return true;
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double spow_libm(double x, double p) {
  if (x > 0.0) return std::pow(x, p);
  if (x < 0.0) return -std::pow(-x, p);
  return 0.0;
}

double abs_pow_sum_avx2(const double* x, std::size_t n, double p) {
  std::size_t k = 0;
  __m256d acc = _mm256_setzero_pd();
  if (p == 2.0) {
    for (; k + 4 <= n; k += 4) {
      const __m256d v = _mm256_loadu_pd(x + k);
      acc = _mm256_fmadd_pd(v, v, acc);
    }
  } else if (p == 1.0) {
    for (; k + 4 <= n; k += 4) {
      acc = _mm256_add_pd(acc, _mm256_and_pd(_mm256_loadu_pd(x + k), kAbsMask));
    }
  } else {
    for (; k + 4 <= n; k += 4) {
      const __m256d v = _mm256_loadu_pd(x + k);
      __m256d r;
      if (v_abs_pow(v, p, r)) {
        acc = _mm256_add_pd(acc, r);
      } else {
        double tmp = 0.0;
        for (int j = 0; j < 4; ++j) tmp += std::pow(std::abs(x[k + j]), p);
        acc = _mm256_add_pd(acc, _mm256_set_pd(0.0, 0.0, 0.0, tmp));
      }
    }
  }
  double total = hsum(acc);
  for (; k < n; ++k) total += (p == 2.0) ? x[k] * x[k] : std::pow(std::abs(x[k]), p);
  return total;
}

void signed_pow_avx2(const double* x, std::size_t n, double p, double* out) {
  if (p == 1.0) {
    for (std::size_t k = 0; k < n; ++k) out[k] = x[k];
    return;
  }
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d v = _mm256_loadu_pd(x + k);
    __m256d r;
    if (v_abs_pow(v, p, r)) {
      _mm256_storeu_pd(out + k, _mm256_or_pd(r, _mm256_and_pd(v, kSignMask)));
    } else {
      for (int j = 0; j < 4; ++j) out[k + j] = spow_libm(x[k + j], p);
    }
  }
  for (; k < n; ++k) out[k] = spow_libm(x[k], p);
}

double dot_signed_pow_avx2(const double* a, const double* x, std::size_t n, double p) {
  std::size_t k = 0;
  __m256d acc = _mm256_setzero_pd();
  if (p == 1.0) {
    for (; k + 4 <= n; k += 4) {
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(x + k), acc);
    }
    double total = hsum(acc);
    for (; k < n; ++k) total += a[k] * x[k];
    return total;
  }
  for (; k + 4 <= n; k += 4) {
    const __m256d v = _mm256_loadu_pd(x + k);
    __m256d r;
    if (v_abs_pow(v, p, r)) {
      const __m256d sp = _mm256_or_pd(r, _mm256_and_pd(v, kSignMask));
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), sp, acc);
    } else {
      double tmp = 0.0;
      for (int j = 0; j < 4; ++j) tmp += a[k + j] * spow_libm(x[k + j], p);
      acc = _mm256_add_pd(acc, _mm256_set_pd(0.0, 0.0, 0.0, tmp));
    }
  }
  double total = hsum(acc);
  for (; k < n; ++k) total += a[k] * spow_libm(x[k], p);
  return total;
}

double masked_window_sum_avx2(const double* c, const double* m, std::size_t n,
                              double lo, double hi) {
  std::size_t k = 0;
  __m256d acc = _mm256_setzero_pd();
  const __m256d lov = _mm256_set1_pd(lo);
  const __m256d hiv = _mm256_set1_pd(hi);
  for (; k + 4 <= n; k += 4) {
    const __m256d cv = _mm256_loadu_pd(c + k);
    const __m256d mask = _mm256_and_pd(_mm256_cmp_pd(cv, lov, _CMP_GE_OQ),
                                       _mm256_cmp_pd(cv, hiv, _CMP_LE_OQ));
    acc = _mm256_add_pd(acc, _mm256_and_pd(mask, _mm256_loadu_pd(m + k)));
  }
  double total = hsum(acc);
  for (; k < n; ++k) {
    if (c[k] >= lo && c[k] <= hi) total += m[k];
  }
  return total;
}

double masked_window_sum2_avx2(const double* cx, const double* cy, const double* m,
                               std::size_t n, double lox, double hix, double loy,
                               double hiy) {
  std::size_t k = 0;
  __m256d acc = _mm256_setzero_pd();
  const __m256d loxv = _mm256_set1_pd(lox), hixv = _mm256_set1_pd(hix);
  const __m256d loyv = _mm256_set1_pd(loy), hiyv = _mm256_set1_pd(hiy);
  for (; k + 4 <= n; k += 4) {
    const __m256d xv = _mm256_loadu_pd(cx + k);
    const __m256d yv = _mm256_loadu_pd(cy + k);
    const __m256d mask = _mm256_and_pd(
        _mm256_and_pd(_mm256_cmp_pd(xv, loxv, _CMP_GE_OQ), _mm256_cmp_pd(xv, hixv, _CMP_LE_OQ)),
        _mm256_and_pd(_mm256_cmp_pd(yv, loyv, _CMP_GE_OQ), _mm256_cmp_pd(yv, hiyv, _CMP_LE_OQ)));
    acc = _mm256_add_pd(acc, _mm256_and_pd(mask, _mm256_loadu_pd(m + k)));
  }
  double total = hsum(acc);
  for (; k < n; ++k) {
    if (cx[k] >= lox && cx[k] <= hix && cy[k] >= loy && cy[k] <= hiy) total += m[k];
  }
  return total;
}

}  // namespace

const Ops* avx2() {
  static const Ops ops = {
      "avx2",
      &abs_pow_sum_avx2,
      &signed_pow_avx2,
      &dot_signed_pow_avx2,
      &masked_window_sum_avx2,
      &masked_window_sum2_avx2,
  };
  return &ops;
}

}  // namespace stablefield::kernels

#else  // non-x86 build or missing ISA flags

namespace stablefield::kernels {
const Ops* avx2() { return nullptr; }
}  // namespace stablefield::kernels

#endif
