#pragma once

#include <Eigen/Core>
#include <memory>
#include <span>
#include <vector>

#include "stablefield/field_models.hpp"

namespace stablefield {

/// Target + observation sites bound to a field model. For kernel models the
/// site kernels are discretized once over the measure grid and shared between
/// every scale/covariation/gradient evaluation, so the optimization problems
/// and their certificates all see one consistent quadrature. Re-targeting via
/// with_target() reuses the shared site kernels.
class SiteSystem {
 public:
  static SiteSystem kernel_system(FieldModel model, DiscreteMeasureGrid grid,
                                  std::vector<Point> sites, Point target);

  /// (Sub-)Gaussian system: covariation comes from the covariance closed
  /// form, no grid involved. alpha = 2 is the Gaussian case.
  static SiteSystem gaussian_system(FieldModel model, std::vector<Point> sites,
                                    Point target);

  const FieldModel& model() const { return model_; }
  const DiscreteMeasureGrid& grid() const;
  const std::vector<Point>& sites() const { return sites_; }
  const Point& target() const { return target_; }
  double alpha() const { return model_.alpha; }
  std::size_t n() const { return sites_.size(); }
  bool kernel_based() const { return static_cast<bool>(cache_); }

  /// cells x n matrix of site kernels (kernel systems only).
  const Eigen::MatrixXd& site_kernels() const;
  const Eigen::VectorXd& target_kernel() const;
  double cell_volume() const;

  SiteSystem with_target(const Point& target) const;

  /// Index of the observation site the target coincides with (within 1e-12),
  /// or -1. Predictors snap to the basis vector in that case.
  int coincident_site() const;

 private:
  SiteSystem() = default;

  struct KernelCache {
    DiscreteMeasureGrid grid;
    Eigen::MatrixXd site_kernels;  // cells x n
  };

  FieldModel model_{2.0, SubGaussian{}};
  std::vector<Point> sites_;
  Point target_;
  std::shared_ptr<const KernelCache> cache_;
  Eigen::VectorXd target_kernel_;
};

/// Scale of lambda_0 X(t0) + sum_i lambda_i X(t_i) for kernel systems:
/// ( sum_k |combined kernel at c_k|^alpha * vol )^{1/alpha}.
/// weights has n+1 entries, weights[0] belonging to the target.
double scale_of_combination(const SiteSystem& sys, std::span<const double> weights);

/// sigma^alpha of X(t0): kernel quadrature, or (C(0)/2)^{alpha/2} for
/// (sub-)Gaussian systems.
double sigma_alpha_target(const SiteSystem& sys);

/// [X(s), X(t)]_alpha for a kernel model via the grid quadrature of
/// integral f_s f_t^{<alpha-1>} dm.
double covariation_kernel(const FieldModel& model, const DiscreteMeasureGrid& grid,
                          const Point& s, const Point& t);

/// [X(s), X(t)]_alpha = 2^{-alpha/2} C(s-t) C(0)^{(alpha-2)/2} for
/// sub-Gaussian fields; alpha = 2 gives Cov/2.
double covariation_subgaussian(const CovarianceModel& cov, double alpha, const Point& s,
                               const Point& t);

/// Moment-ratio (FLOM) estimate of [X,Y]_alpha from paired samples of a
/// jointly SalphaS vector: mean(x y^{<p-1>}) / mean|y|^p * sigma_y^alpha.
/// Only the symmetric case is supported; a nonzero beta_y is rejected.
double estimate_covariation_flom(std::span<const double> x, std::span<const double> y,
                                 double alpha, double p, double sigma_y,
                                 double beta_y = 0.0);

/// Scale estimate (mean|X|^p)^{1/p} / c_{alpha,0}(p) from SalphaS samples.
double sigma_from_flom(std::span<const double> x, double alpha, double p);

/// d sigma^alpha_{Xhat - X(t0)} / d lambda_j =
///   alpha [X(t_j), sum_i lambda_i X(t_i) - X(t0)]_alpha,
/// evaluated on the shared grid quadrature. lambda has n entries.
Eigen::VectorXd gradient_scale_alpha(const SiteSystem& sys, std::span<const double> lambda);

struct FullDimReport {
  bool full_dimensional = false;
  double smin = 0.0;
  double smax = 0.0;
  double ratio = 0.0;
  double threshold = 1e-10;
};

/// Linear independence of the discretized site kernels, judged by the ratio
/// of extreme singular values against the threshold.
FullDimReport full_dimensionality_check(const SiteSystem& sys);

/// Skewness parameter of sum_i lambda_i X(t_i) on a grid with a skewness
/// field. Throws std::domain_error when the combination has zero scale.
double skewness_of_combination(const SiteSystem& sys, std::span<const double> lambda);

/// K(j,i) = [X(t_i), X(t_j)]_alpha and b(j) = [X(t0), X(t_j)]_alpha.
struct CovariationSystem {
  Eigen::MatrixXd K;
  Eigen::VectorXd b;
};
CovariationSystem build_covariation_system(const SiteSystem& sys);

/// a_i = [X(t_i), X(t0)]_alpha (note the argument order; the covariation is
/// not symmetric for alpha < 2).
Eigen::VectorXd mcl_objective_vector(const SiteSystem& sys);

}  // namespace stablefield
