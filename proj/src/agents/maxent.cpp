#include "o2o/agents/maxent.hpp"

#include <algorithm>
#include <cmath>

#include "o2o/error.hpp"

namespace o2o::agents {

MaxEntIdentityResult verify_maxent_identity(const std::function<double(double)>& q, double alpha,
                                            const Grid1D& grid) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be positive and finite");
  if (grid.points < 3 || !(grid.hi > grid.lo)) throw InvalidArgument("grid needs >= 3 points and hi > lo");
  const std::size_t n = grid.points;
  const double h = (grid.hi - grid.lo) / static_cast<double>(n - 1);

  MaxEntIdentityResult out;
  out.grid.resize(n);
  std::vector<double> qs(n), logits(n);
  double top = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    out.grid[i] = grid.lo + h * static_cast<double>(i);
    qs[i] = q(out.grid[i]);
    logits[i] = qs[i] / alpha;
    if (!std::isfinite(logits[i])) throw InvalidArgument("Q / alpha is not finite on the grid; normalizer diverges");
    top = std::max(top, logits[i]);
  }
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wq = (i == 0 || i + 1 == n) ? 0.5 * h : h;
    z += wq * std::exp(logits[i] - top);
  }
  out.log_normalizer = top + std::log(z);
  if (!std::isfinite(out.log_normalizer)) throw InvalidArgument("normalizer of exp(Q / alpha) diverges");

  out.log_density.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.log_density[i] = logits[i] - out.log_normalizer;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double dlog = (out.log_density[i + 1] - out.log_density[i - 1]) / (2.0 * h);
    const double dq = (qs[i + 1] - qs[i - 1]) / (2.0 * h * alpha);
    out.gap = std::max(out.gap, std::abs(dlog - dq));
  }
  return out;
}

}  // namespace o2o::agents
