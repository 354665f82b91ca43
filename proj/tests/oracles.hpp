// Test-only oracles, kept independent of the library's implementation paths:
// a second positive-stable sampler (Kanter's representation), a simple-kriging
// solver by plain Gauss elimination, and central finite differences.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "stablefield/rng.hpp"

namespace oracles {

// Kanter's representation of the positive alpha'-stable law with Laplace
// transform exp(-s^{alpha'}), 0 < alpha' < 1. Matches the normalization of
// the sub-Gaussian mixing variable A for alpha' = alpha/2.
inline double kanter_positive_stable(double alpha_prime, stablefield::RngStream& rng) {
  constexpr double pi = 3.14159265358979323846;
  const double u = pi * rng.uniform01();
  const double w = rng.exponential();
  return std::sin(alpha_prime * u) / std::pow(std::sin(u), 1.0 / alpha_prime) *
         std::pow(std::sin((1.0 - alpha_prime) * u) / w, (1.0 - alpha_prime) / alpha_prime);
}

// Simple kriging weights via Gauss elimination with partial pivoting:
// solves [C(t_i - t_j)] w = [C(t0 - t_i)]. Deliberately free of Eigen.
inline std::vector<double> kriging_weights(const std::vector<std::vector<double>>& sigma,
                                           std::vector<double> rhs) {
  const std::size_t n = rhs.size();
  std::vector<std::vector<double>> a(sigma);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (a[pivot][col] == 0.0) throw std::runtime_error("kriging oracle: singular system");
    std::swap(a[pivot], a[col]);
    std::swap(rhs[pivot], rhs[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> w(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = rhs[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * w[c];
    w[i] = acc / a[i][i];
  }
  return w;
}

// Central finite difference of a scalar function of n variables.
template <typename F>
std::vector<double> central_diff(const F& f, std::span<const double> x, double h) {
  std::vector<double> grad(x.size());
  std::vector<double> p(x.begin(), x.end());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double saved = p[j];
    p[j] = saved + h;
    const double up = f(p);
    p[j] = saved - h;
    const double down = f(p);
    p[j] = saved;
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline double sign_correlation(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double sx = x[i] > 0 ? 1.0 : (x[i] < 0 ? -1.0 : 0.0);
    const double sy = y[i] > 0 ? 1.0 : (y[i] < 0 ? -1.0 : 0.0);
    acc += sx * sy;
  }
  return acc / static_cast<double>(x.size());
}

}  // namespace oracles
