#pragma once

#include "stablefield/common.hpp"
#include "stablefield/rng.hpp"

namespace stablefield {

/// Parameter quadruple of the stable law S_alpha(sigma, beta, mu).
/// alpha = 2 is the Gaussian boundary case with variance 2*sigma^2.
struct StableParams {
  double alpha;
  double sigma;
  double beta;
  double mu;

  StableParams(double alpha_, double sigma_, double beta_ = 0.0, double mu_ = 0.0);
};

/// Signed power a^{<p>} = |a|^p * sign(a).
/// Throws std::domain_error for a = 0 with p < 0.
double signed_power(double a, double p);

/// One draw from S_alpha(sigma, beta, mu) via the Chambers-Mallows-Stuck
/// transform of one uniform and one exponential variate. alpha within 1e-10
/// of 1 is routed to the alpha=1 branch.
double sample_stable(const StableParams& params, RngStream& rng);

/// Scale of the totally skewed positive multiplier A used by sub-Gaussian
/// fields: (cos(pi*alpha/4))^(2/alpha).
double subgaussian_a_scale(double alpha);

/// One draw of A ~ S_{alpha/2}(subgaussian_a_scale(alpha), 1, 0), the
/// strictly positive mixing variable of a sub-Gaussian field. Requires
/// 1 < alpha < 2.
double sample_subgaussian_A(double alpha, RngStream& rng);

/// c_{alpha,0}(p) = (E|X|^p)^{1/p} for X ~ S_alpha(1,0,0), so that
/// (E|X|^p)^{1/p} = c * sigma for general sigma. Symmetric case only;
/// requires 0 < p < alpha. Evaluated once per (alpha, p) by numerical
/// quadrature of the characteristic-function integral
///   E|X|^p = [ integral_0^inf (1 - exp(-u^alpha)) u^{-1-p} du ] / D(p),
///   D(p)   = Gamma(1-p) cos(pi p / 2) / p   (D(1) = pi/2),
/// then cached. Accuracy ~1e-10 relative.
double moment_constant(double alpha, double p);

}  // namespace stablefield
