#include "stablefield/stable.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace stablefield {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Recursive adaptive Simpson with absolute tolerance.
double adaptive_simpson(double (*f)(double, double, double), double p1, double p2,
                        double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm, p1, p2), frm = f(rm, p1, p2);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson(f, p1, p2, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, p1, p2, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(double (*f)(double, double, double), double p1, double p2, double a,
                 double b, double tol) {
  const double fa = f(a, p1, p2), fb = f(b, p1, p2), fm = f(0.5 * (a + b), p1, p2);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, p1, p2, a, b, fa, fm, fb, whole, tol, 48);
}

// (1 - exp(-u^alpha)) u^{-1-p} on u in (0,1]. The substitution
// u = s^{1/(alpha-p)} flattens the endpoint singularity completely:
// the transformed integrand is g(s^{alpha/(alpha-p)}) / (alpha-p) with
// g(y) = (1-exp(-y))/y, smooth and bounded on [0,1].
double cf_head(double s, double alpha, double p) {
  const double inv = 1.0 / (alpha - p);
  if (s <= 0.0) return inv;
  const double y = std::pow(s, alpha * inv);
  const double g = (y < 1e-8) ? 1.0 - 0.5 * y : (1.0 - std::exp(-y)) / y;
  return g * inv;
}

// exp(-v) v^{-p/alpha - 1} for the tail integral after v = u^alpha.
double cf_tail(double v, double alpha, double p) {
  return std::exp(-v) * std::pow(v, -p / alpha - 1.0);
}

// E|X|^p for X ~ S_alpha(1,0,0):
//   integral_0^inf (1-exp(-u^alpha)) u^{-1-p} du  =  head + 1/p - tail/alpha,
// where the closed 1/p accounts for the constant 1 on (1,inf).
double abs_moment_sas(double alpha, double p) {
  const double head = integrate(&cf_head, alpha, p, 0.0, 1.0, 1e-13);
  const double tail = integrate(&cf_tail, alpha, p, 1.0, 60.0, 1e-14);
  const double numerator = head + 1.0 / p - tail / alpha;

  double denom;  // integral_0^inf (1-cos u) u^{-1-p} du
  if (std::abs(p - 1.0) < 1e-12) {
    denom = kPi / 2.0;
  } else {
    denom = std::tgamma(1.0 - p) * std::cos(kPi * p / 2.0) / p;
  }
  return numerator / denom;
}

}  // namespace

StableParams::StableParams(double alpha_, double sigma_, double beta_, double mu_)
    : alpha(alpha_), sigma(sigma_), beta(beta_), mu(mu_) {
  if (!(alpha > 0.0) || alpha > 2.0)
    throw std::invalid_argument("StableParams: alpha must lie in (0,2]");
  if (!(sigma >= 0.0)) throw std::invalid_argument("StableParams: sigma must be >= 0");
  if (beta < -1.0 || beta > 1.0)
    throw std::invalid_argument("StableParams: beta must lie in [-1,1]");
  if (!std::isfinite(mu)) throw std::invalid_argument("StableParams: mu must be finite");
}

double signed_power(double a, double p) {
  if (a > 0.0) return std::pow(a, p);
  if (a < 0.0) return -std::pow(-a, p);
  if (p < 0.0) throw std::domain_error("signed_power: a = 0 with negative exponent");
  return 0.0;
}

double sample_stable(const StableParams& params, RngStream& rng) {
  const double alpha = params.alpha;
  const double beta = params.beta;

  // Draw the variates unconditionally so that degenerate parameters consume
  // the same amount of stream as the general case.
  const double v = kPi * (rng.uniform01() - 0.5);  // Uniform(-pi/2, pi/2)
  const double w = rng.exponential();

  if (params.sigma == 0.0) return params.mu;

  if (alpha == 2.0) {
    // CMS collapses to 2 sin(V) sqrt(W), a N(0,2) variate.
    const double x = 2.0 * std::sin(v) * std::sqrt(w);
    return params.mu + params.sigma * x;
  }

  if (std::abs(alpha - 1.0) < 1e-10) {
    const double half_pi = kPi / 2.0;
    const double x = (1.0 / half_pi) *
                     ((half_pi + beta * v) * std::tan(v) -
                      beta * std::log((half_pi * w * std::cos(v)) / (half_pi + beta * v)));
    // Scaling an alpha=1 law shifts by (2/pi) beta sigma log(sigma).
    return params.mu + params.sigma * x +
           (2.0 / kPi) * beta * params.sigma * std::log(params.sigma);
  }

  double x;
  if (beta == 0.0) {
    x = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
        std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
  } else {
    const double tan_half = std::tan(kPi * alpha / 2.0);
    const double b = std::atan(beta * tan_half) / alpha;
    const double s = std::pow(1.0 + beta * beta * tan_half * tan_half, 0.5 / alpha);
    x = s * std::sin(alpha * (v + b)) / std::pow(std::cos(v), 1.0 / alpha) *
        std::pow(std::cos(v - alpha * (v + b)) / w, (1.0 - alpha) / alpha);
  }
  return params.mu + params.sigma * x;
}

double subgaussian_a_scale(double alpha) {
  return std::pow(std::cos(kPi * alpha / 4.0), 2.0 / alpha);
}

double sample_subgaussian_A(double alpha, RngStream& rng) {
  if (!(alpha > 1.0) || !(alpha < 2.0))
    throw std::invalid_argument("sample_subgaussian_A: alpha must lie in (1,2)");
  const StableParams law(alpha / 2.0, subgaussian_a_scale(alpha), 1.0, 0.0);
  return sample_stable(law, rng);
}

double moment_constant(double alpha, double p) {
  if (!(alpha > 0.0) || alpha > 2.0)
    throw std::invalid_argument("moment_constant: alpha must lie in (0,2]");
  if (!(p > 0.0) || !(p < alpha))
    throw std::domain_error("moment_constant: requires 0 < p < alpha (E|X|^p is "
                            "infinite for p >= alpha)");

  static std::map<std::pair<double, double>, double> cache;
  static std::mutex cache_mutex;
  const std::pair<double, double> key{alpha, p};
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double value = std::pow(abs_moment_sas(alpha, p), 1.0 / p);
  std::lock_guard<std::mutex> lock(cache_mutex);
  cache.emplace(key, value);
  return value;
}

}  // namespace stablefield
