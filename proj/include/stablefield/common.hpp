#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace stablefield {

inline constexpr const char* kVersion = "0.1.0";

// Generator identity; bump whenever the draw sequence for a fixed
// (seed, stream) changes, so archived results stay attributable.
inline constexpr const char* kRngVersion = "pcg64-xslrr/1";

/// A location in R^1 or R^2. One-dimensional call sites use x and leave y at 0.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline bool same_point(const Point& a, const Point& b, int dim, double tol = 1e-12) {
  if (dim == 1) return std::abs(a.x - b.x) <= tol;
  return std::abs(a.x - b.x) <= tol && std::abs(a.y - b.y) <= tol;
}

/// Thrown when a solver or factorization cannot produce a usable result
/// (singular systems, non-convergence, indefinite covariance matrices).
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stablefield
