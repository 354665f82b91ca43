#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stablefield/field_models.hpp"
#include "stablefield/predictors.hpp"

namespace stablefield {

/// The nine default observation sites on [0,1]^2.
std::vector<Point> default_observation_sites();

/// Monte Carlo extrapolation study: simulate a field on an evaluation grid,
/// extrapolate from the observation sites with every requested method, and
/// pool the deviations simulated-minus-predicted over grid points and
/// realizations.
struct BenchmarkConfig {
  enum class Field { kSubGaussian, kLevySheet };

  Field field = Field::kSubGaussian;
  double alpha = 1.5;
  CovarianceModel cov{CovarianceModel::Family::kGaussian, 7.0, 0.1};

  int realizations = 200;
  int grid_resolution = 50;  // evaluation grid per axis on [0,1]^2
  int measure_cells = 128;   // integration cells per axis (Levy sheet)

  std::vector<Point> observation_sites = default_observation_sites();

  /// Methods to run: lsl, col, mcl plus ml and cs for sub-Gaussian fields.
  /// Empty selects the full set for the field type.
  std::vector<std::string> methods;

  std::uint64_t seed = 1;
  int threads = 1;
  double jitter_scale = 1e-10;

  std::string out_dir;  // empty: compute only, write nothing
  bool write_raw = true;
  bool write_surfaces = false;

  void validate() const;
  std::vector<std::string> effective_methods() const;
};

struct SummaryRow {
  double q05 = 0, q25 = 0, median = 0, mean = 0, q75 = 0, q95 = 0;
};

struct DeviationSummary {
  std::vector<std::string> methods;
  std::vector<SummaryRow> rows;
};

/// Empirical quantiles (linear interpolation between order statistics,
/// h = (n-1)p) and the mean. Throws on empty input.
SummaryRow summary_stats(std::span<const double> values);

struct BenchmarkResult {
  DeviationSummary summary;
  std::size_t deviations_per_method = 0;
  /// Largest |deviation| over evaluation points that coincide with an
  /// observation site, across all methods and realizations; 0 when the grid
  /// hits no observation site.
  double max_abs_deviation_at_sites = 0.0;
  std::vector<std::string> files_written;
};

BenchmarkResult run_benchmark(const BenchmarkConfig& config);

/// Grid-shaped data to CSV (x,y,value rows with a `#` metadata line).
void export_surface(const std::string& csv_path, std::span<const Point> pts,
                    std::span<const double> values, const std::string& comment);

/// Companion gnuplot script rendering the CSV as a heatmap.
void write_surface_plot_script(const std::string& gp_path, const std::string& csv_name,
                               const std::string& title);

}  // namespace stablefield
