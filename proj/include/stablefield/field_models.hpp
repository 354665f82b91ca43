#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stablefield/common.hpp"
#include "stablefield/grid.hpp"
#include "stablefield/rng.hpp"

namespace stablefield {

/// Stationary covariance of the Gaussian part of a (sub-)Gaussian field.
struct CovarianceModel {
  enum class Family { kGaussian, kExponential };

  Family family = Family::kGaussian;
  double sill = 1.0;
  double range = 1.0;

  CovarianceModel() = default;
  CovarianceModel(Family family_, double sill_, double range_);

  double operator()(double h) const;
  double at(const Point& a, const Point& b) const;
};

// --- kernel families -------------------------------------------------------

/// f_t(x) = 1{0 <= x_d <= t_d for all d}. The Levy sheet / Levy motion kernel.
struct LevySheet {
  int dim = 2;
};

/// f_t(x) = f(t - x), user-supplied f with a declared support radius;
/// evaluations outside the radius return 0.
struct MovingAverage {
  int dim = 1;
  std::function<double(Point)> kernel;
  double support_radius = 0.0;
};

/// f_t(x) = exp(-rate (t-x)) 1{t - x >= 0} on the line.
struct OrnsteinUhlenbeck {
  double rate = 1.0;
};

/// No kernel representation here; the field is A^{1/2} G with G Gaussian.
struct SubGaussian {
  CovarianceModel cov;
};

struct FieldModel {
  double alpha = 2.0;
  std::variant<LevySheet, MovingAverage, OrnsteinUhlenbeck, SubGaussian> family;

  static FieldModel levy_sheet(double alpha, int dim);
  static FieldModel moving_average(double alpha, int dim, std::function<double(Point)> f,
                                   double support_radius);
  static FieldModel ornstein_uhlenbeck(double alpha, double rate);
  static FieldModel sub_gaussian(double alpha, CovarianceModel cov);

  bool is_kernel_model() const { return !std::holds_alternative<SubGaussian>(family); }
  int dim() const;
  const CovarianceModel& covariance() const;
  std::string tag() const;
};

/// f_t(x) for the kernel families. Throws std::invalid_argument for
/// sub-Gaussian models, which have no kernel representation in this library.
double eval_kernel(const FieldModel& model, const Point& t, const Point& x);

/// f_t at every cell center of the grid.
void kernel_column(const FieldModel& model, const Point& t, const DiscreteMeasureGrid& grid,
                   std::span<double> out);

/// integral |f_t|^alpha over the grid (midpoint rule).
double kernel_mass_alpha(const FieldModel& model, const Point& t,
                         const DiscreteMeasureGrid& grid);

struct CoverageReport {
  bool ok = true;
  /// Worst site: relative kernel mass found outside the grid, estimated on a
  /// domain extended by the grid extent in every direction.
  double worst_outside_fraction = 0.0;
  double tolerance = 0.0;
};

CoverageReport check_grid_coverage(const FieldModel& model, std::span<const Point> sites,
                                   const DiscreteMeasureGrid& grid, double tol = 1e-6);

// --- realizations ----------------------------------------------------------

struct FieldRealization {
  int dim = 1;
  std::vector<Point> sites;
  std::vector<double> values;

  // Provenance.
  std::string model_tag;
  double alpha = 2.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  // Retained randomness for conditional reuse.
  std::vector<double> measure_draws;
  double a_draw = std::numeric_limits<double>::quiet_NaN();

  bool coverage_warning = false;

  void write_csv(std::ostream& os) const;
  void write_csv_file(const std::string& path) const;
};

/// Parses a realization CSV (as written by write_csv): `#` comment lines,
/// a `x[,y],value` header, one row per site.
struct SiteData {
  int dim = 1;
  std::vector<Point> sites;
  std::vector<double> values;
};
SiteData read_sites_csv(std::istream& is);
SiteData read_sites_csv_file(const std::string& path);

// --- simulation ------------------------------------------------------------

/// Independent per-cell draws M_k ~ S_alpha(volume^{1/alpha}, skewness_k, 0).
std::vector<double> simulate_measure(const DiscreteMeasureGrid& grid, double alpha,
                                     RngStream& rng);

/// Discretized stochastic integral: X(t) = sum_k f_t(c_k) M_k. Kernel models
/// only. The measure draws are retained in the realization.
FieldRealization simulate_field(const FieldModel& model, std::span<const Point> sites,
                                const DiscreteMeasureGrid& grid, RngStream& rng,
                                bool check_coverage = true);

/// Dense zero-mean Gaussian vector with covariance [C(t_i - t_j)] via a
/// Cholesky factorization; `jitter_scale * C(0)` is added to the diagonal and
/// escalated by factors of 100 (up to 1e6x) if the factorization fails.
FieldRealization simulate_gaussian_field(const CovarianceModel& cov,
                                         std::span<const Point> sites, int dim,
                                         RngStream& rng, double jitter_scale = 1e-10);

FieldRealization simulate_subgaussian_field(const CovarianceModel& cov, double alpha,
                                            std::span<const Point> sites, int dim,
                                            RngStream& rng, double jitter_scale = 1e-10);

// Shared linear-algebra helpers (also used by the predictors).
Eigen::MatrixXd covariance_matrix(const CovarianceModel& cov, std::span<const Point> pts);

/// LLT with diagonal jitter escalation. Throws numerical_error carrying a
/// smallest-eigenvalue estimate when even the largest jitter fails.
Eigen::LLT<Eigen::MatrixXd> cholesky_with_jitter(Eigen::MatrixXd sigma, double jitter);

}  // namespace stablefield
