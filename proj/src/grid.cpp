#include "stablefield/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace stablefield {
namespace {

void check_extent(double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("DiscreteMeasureGrid: empty extent");
}

double midpoint(double lo, double hi, std::size_t i, std::size_t n) {
  return lo + (static_cast<double>(2 * i + 1) * (hi - lo)) / static_cast<double>(2 * n);
}

}  // namespace

DiscreteMeasureGrid DiscreteMeasureGrid::line(double lo, double hi, std::size_t cells,
                                              double skewness) {
  check_extent(lo, hi);
  if (cells == 0) throw std::invalid_argument("DiscreteMeasureGrid: cells must be > 0");
  if (std::abs(skewness) > 1.0)
    throw std::invalid_argument("DiscreteMeasureGrid: skewness must lie in [-1,1]");

  DiscreteMeasureGrid g;
  g.dim_ = 1;
  g.lo_ = {lo, 0.0};
  g.hi_ = {hi, 0.0};
  g.nx_ = cells;
  g.volume_ = (hi - lo) / static_cast<double>(cells);
  g.cx_.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) g.cx_[i] = midpoint(lo, hi, i, cells);
  g.skew_const_ = skewness;

  // Cells must tile the domain.
  if (std::abs(g.total_volume() - (hi - lo)) > 1e-12 * (hi - lo))
    throw std::logic_error("DiscreteMeasureGrid: cells do not tile the domain");
  return g;
}

DiscreteMeasureGrid DiscreteMeasureGrid::box(Point lo, Point hi, std::size_t nx,
                                             std::size_t ny, double skewness) {
  check_extent(lo.x, hi.x);
  check_extent(lo.y, hi.y);
  if (nx == 0 || ny == 0)
    throw std::invalid_argument("DiscreteMeasureGrid: cells must be > 0");
  if (std::abs(skewness) > 1.0)
    throw std::invalid_argument("DiscreteMeasureGrid: skewness must lie in [-1,1]");

  DiscreteMeasureGrid g;
  g.dim_ = 2;
  g.lo_ = lo;
  g.hi_ = hi;
  g.nx_ = nx;
  g.ny_ = ny;
  g.volume_ = (hi.x - lo.x) / static_cast<double>(nx) * ((hi.y - lo.y) / static_cast<double>(ny));
  g.cx_.resize(nx * ny);
  g.cy_.resize(nx * ny);
  std::size_t k = 0;
  for (std::size_t j = 0; j < ny; ++j) {
    const double y = midpoint(lo.y, hi.y, j, ny);
    for (std::size_t i = 0; i < nx; ++i, ++k) {
      g.cx_[k] = midpoint(lo.x, hi.x, i, nx);
      g.cy_[k] = y;
    }
  }
  g.skew_const_ = skewness;

  const double domain = (hi.x - lo.x) * (hi.y - lo.y);
  if (std::abs(g.total_volume() - domain) > 1e-12 * domain)
    throw std::logic_error("DiscreteMeasureGrid: cells do not tile the domain");
  return g;
}

void DiscreteMeasureGrid::set_skewness(const std::function<double(Point)>& beta) {
  skew_.resize(cell_count());
  for (std::size_t k = 0; k < cell_count(); ++k) {
    const double b = beta(center(k));
    if (std::abs(b) > 1.0)
      throw std::invalid_argument("DiscreteMeasureGrid: skewness must lie in [-1,1]");
    skew_[k] = b;
  }
}

bool DiscreteMeasureGrid::symmetric() const {
  if (skew_.empty()) return skew_const_ == 0.0;
  for (double b : skew_) {
    if (b != 0.0) return false;
  }
  return true;
}

DiscreteMeasureGrid DiscreteMeasureGrid::doubled() const {
  if (dim_ == 1) {
    const double w = hi_.x - lo_.x;
    DiscreteMeasureGrid g = line(lo_.x - w, hi_.x + w, 3 * nx_, skew_const_);
    return g;
  }
  const double wx = hi_.x - lo_.x;
  const double wy = hi_.y - lo_.y;
  return box({lo_.x - wx, lo_.y - wy}, {hi_.x + wx, hi_.y + wy}, 3 * nx_, 3 * ny_,
             skew_const_);
}

}  // namespace stablefield
