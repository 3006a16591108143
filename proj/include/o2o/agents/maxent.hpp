#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace o2o::agents {

struct Grid1D {
  double lo = -5.0;
  double hi = 5.0;
  std::size_t points = 2001;
};

struct MaxEntIdentityResult {
  /// sup over interior grid points of |d/da log pi*(a) - (1/alpha) dQ/da|.
  double gap = 0.0;
  double log_normalizer = 0.0;
  std::vector<double> grid;
  std::vector<double> log_density;
};

/// Builds pi* = exp(Q / alpha) / Z on the grid (trapezoid quadrature for Z, in
/// log space) and compares central differences of log pi* with those of Q / alpha.
/// Throws InvalidArgument for alpha <= 0, fewer than 3 points, or a normalizer
/// that is not finite.
MaxEntIdentityResult verify_maxent_identity(const std::function<double(double)>& q, double alpha,
                                            const Grid1D& grid = {});

}  // namespace o2o::agents
