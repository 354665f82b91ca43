#pragma once

#include <Eigen/Core>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stablefield/covariation.hpp"
#include "stablefield/field_models.hpp"

namespace stablefield {

enum class Method { kLSL, kCOL, kMCL, kML };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

/// Linear predictor weights plus solver certificates.
///
/// first_order_residual carries the method's primary certificate:
///   LSL  - Euclidean norm of the gradient of sigma^alpha at lambda
///   COL  - ||K lambda - b||
///   MCL  - relative misalignment between the covariation vector and the
///          scale gradient (the Lagrange condition)
///   ML   - ||Sigma lambda - c0|| (the equivalent kriging residual)
struct PredictorWeights {
  Eigen::VectorXd lambda;
  Method method = Method::kCOL;
  double achieved_scale = std::numeric_limits<double>::quiet_NaN();
  double first_order_residual = std::numeric_limits<double>::quiet_NaN();
  double constraint_residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
};

struct PredictionProblem {
  SiteSystem sys;
  Eigen::VectorXd observed;

  PredictionProblem(SiteSystem sys_, Eigen::VectorXd observed_);
};

/// Covariation-orthogonal weights: solves K lambda = b.
PredictorWeights col_weights(const PredictionProblem& problem);

/// Least-scale weights: minimizes sigma^alpha of the prediction error over
/// the shared grid quadrature (convex; iterates until the gradient norm is
/// <= 1e-9 (1 + objective) or 500 iterations). (Sub-)Gaussian systems route
/// to the equivalent kriging solve.
PredictorWeights lsl_weights(const PredictionProblem& problem);

/// Maximum-covariation weights: maximizes <lambda, a> subject to
/// sigma_{sum lambda_i X(t_i)} = sigma_{X(t0)}. Solved through the convex
/// program min sigma(lambda) s.t. <a, lambda> = const (the two problems have
/// the same maximizer direction because the scale is a norm), then rescaled
/// onto the constraint with the sign that makes the objective positive.
PredictorWeights mcl_weights(const PredictionProblem& problem);

/// Maximum-likelihood weights for (sub-)Gaussian systems via the triangular
/// factor construction: Omega = 2 B B^T, A = B^{-1},
/// lambda_i = -a_{n+1,i} / a_{n+1,n+1}.
PredictorWeights ml_weights_subgaussian(const PredictionProblem& problem);

/// sum_i lambda_i x(t_i).
double predict(const PredictorWeights& weights, std::span<const double> observed);

/// Weights for every target. LSL/MCL warm-start from the previous target in
/// path order (per worker block when threads > 1); COL/ML factor their
/// target-independent parts once.
std::vector<PredictorWeights> weight_field(const SiteSystem& sys,
                                           std::span<const Point> targets, Method method,
                                           int threads = 1);

/// Conditional simulation of a sub-Gaussian field: draws A, conditionally
/// simulates the Gaussian part given G(t_i) = x_i / sqrt(A) via residual
/// kriging on an unconditional draw, scales by sqrt(A). Values at the
/// conditioning sites reproduce the observations. obs_sites may be empty,
/// in which case the output is an unconditional draw.
FieldRealization conditional_simulate_subgaussian(
    const CovarianceModel& cov, double alpha, std::span<const Point> obs_sites,
    std::span<const double> observed, std::span<const Point> targets, RngStream& rng,
    double jitter_scale = 1e-10);

FieldRealization conditional_simulate_subgaussian(const PredictionProblem& problem,
                                                  std::span<const Point> targets,
                                                  RngStream& rng,
                                                  double jitter_scale = 1e-10);

}  // namespace stablefield
