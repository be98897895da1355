#pragma once

#include <cmath>
#include <stdexcept>

#include "efp/grid.hpp"

namespace efp {

/// 100 * ||u - ref|| / ||ref|| over all nodes, boundary included.
inline double relative_l2_error(const Field& u, const Field& ref) {
  u.check_grid(ref);
  const double denom = norm2(ref);
  if (!(denom > 0.0)) throw std::invalid_argument("relative_l2_error: reference has zero norm");
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double d = u[k] - ref[k];
    s += d * d;
  }
  return 100.0 * std::sqrt(s) / denom;
}

inline double mse(const Field& u, const Field& ref) {
  u.check_grid(ref);
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double d = u[k] - ref[k];
    s += d * d;
  }
  return s / static_cast<double>(u.size());
}

}  // namespace efp
