#include "stablefield/kernels.hpp"

#include <cmath>

// Reference kernels. Deliberately written as straight loops over libm so the
// SIMD variants have an unambiguous semantic anchor.

namespace stablefield::kernels {
namespace {

inline double spow(double x, double p) {
  if (x > 0.0) return std::pow(x, p);
  if (x < 0.0) return -std::pow(-x, p);
  return 0.0;
}

double abs_pow_sum_scalar(const double* x, std::size_t n, double p) {
  if (p == 2.0) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += x[k] * x[k];
    return acc;
  }
  if (p == 1.0) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += std::abs(x[k]);
    return acc;
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += std::pow(std::abs(x[k]), p);
  return acc;
}

void signed_pow_scalar(const double* x, std::size_t n, double p, double* out) {
  if (p == 1.0) {
    for (std::size_t k = 0; k < n; ++k) out[k] = x[k];
    return;
  }
  for (std::size_t k = 0; k < n; ++k) out[k] = spow(x[k], p);
}

double dot_signed_pow_scalar(const double* a, const double* x, std::size_t n, double p) {
  double acc = 0.0;
  if (p == 1.0) {
    for (std::size_t k = 0; k < n; ++k) acc += a[k] * x[k];
    return acc;
  }
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * spow(x[k], p);
  return acc;
}

double masked_window_sum_scalar(const double* c, const double* m, std::size_t n,
                                double lo, double hi) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (c[k] >= lo && c[k] <= hi) acc += m[k];
  }
  return acc;
}

double masked_window_sum2_scalar(const double* cx, const double* cy, const double* m,
                                 std::size_t n, double lox, double hix, double loy,
                                 double hiy) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (cx[k] >= lox && cx[k] <= hix && cy[k] >= loy && cy[k] <= hiy) acc += m[k];
  }
  return acc;
}

}  // namespace

const Ops& scalar() {
  static const Ops ops = {
      "scalar",
      &abs_pow_sum_scalar,
      &signed_pow_scalar,
      &dot_signed_pow_scalar,
      &masked_window_sum_scalar,
      &masked_window_sum2_scalar,
  };
  return ops;
}

}  // namespace stablefield::kernels
