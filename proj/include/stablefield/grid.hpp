#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "stablefield/common.hpp"

namespace stablefield {

/// Finite partition of the integration domain: equal-volume cells on a
/// regular 1D interval or 2D box, with midpoint centers and a per-cell
/// skewness value. This is the numerical stand-in for the control measure
/// (Lebesgue on the domain) and the skewness intensity of the random measure.
///
/// Cell counts that are powers of two give exactly representable volumes,
/// which keeps indicator-kernel quadrature sums exact in floating point.
class DiscreteMeasureGrid {
 public:
  /// Empty grid; only useful as a placeholder before assignment.
  DiscreteMeasureGrid() = default;

  static DiscreteMeasureGrid line(double lo, double hi, std::size_t cells,
                                  double skewness = 0.0);
  static DiscreteMeasureGrid box(Point lo, Point hi, std::size_t nx, std::size_t ny,
                                 double skewness = 0.0);

  /// Replace the constant skewness by a per-cell field beta(center) in [-1,1].
  void set_skewness(const std::function<double(Point)>& beta);

  int dim() const { return dim_; }
  std::size_t cell_count() const { return cx_.size(); }
  double cell_volume() const { return volume_; }
  double total_volume() const { return volume_ * static_cast<double>(cell_count()); }

  Point center(std::size_t k) const { return {cx_[k], dim_ == 2 ? cy_[k] : 0.0}; }
  double skewness(std::size_t k) const {
    return skew_.empty() ? skew_const_ : skew_[k];
  }
  bool symmetric() const;

  const std::vector<double>& centers_x() const { return cx_; }
  const std::vector<double>& centers_y() const { return cy_; }

  Point lower() const { return lo_; }
  Point upper() const { return hi_; }

  /// Same resolution, domain extended by its own extent on every side.
  /// Used to estimate kernel mass falling outside the grid.
  DiscreteMeasureGrid doubled() const;

 private:
  int dim_ = 1;
  Point lo_, hi_;
  std::size_t nx_ = 0, ny_ = 1;
  double volume_ = 0.0;
  std::vector<double> cx_, cy_;
  double skew_const_ = 0.0;
  std::vector<double> skew_;
};

}  // namespace stablefield
