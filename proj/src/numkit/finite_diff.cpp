#include "o2o/numkit/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "o2o/error.hpp"
#include "o2o/rng.hpp"

namespace o2o::numkit {

double finite_diff_check(const DifferentiableFn& f, std::span<const double> at,
                         const FiniteDiffOptions& options) {
  if (!(options.step > 0.0)) throw InvalidArgument("finite difference step must be positive");
  const std::size_t n = at.size();
  std::vector<double> grad(n, 0.0);
  f(at, &grad);
  if (grad.size() != n) throw InvalidArgument("analytic gradient length mismatch");

  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), 0);
  const std::size_t budget =
      options.max_coords == 0 ? n : std::max<std::size_t>(options.max_coords, 64);
  if (budget < n) {
    Rng rng(options.seed);
    for (std::size_t i = 0; i < budget; ++i) {
      std::swap(coords[i], coords[i + rng.uniform_index(n - i)]);
    }
    coords.resize(budget);
  }

  std::vector<double> x(at.begin(), at.end());
  double max_diff = 0.0, max_g = 0.0, max_fd = 0.0;
  for (std::size_t i : coords) {
    const double orig = x[i];
    x[i] = orig + options.step;
    const double fp = f(x, nullptr);
    x[i] = orig - options.step;
    const double fm = f(x, nullptr);
    x[i] = orig;
    const double fd = (fp - fm) / (2.0 * options.step);
    max_diff = std::max(max_diff, std::abs(fd - grad[i]));
    max_g = std::max(max_g, std::abs(grad[i]));
    max_fd = std::max(max_fd, std::abs(fd));
  }
  const double scale = std::max(max_g, max_fd);
  return scale == 0.0 ? 0.0 : max_diff / scale;
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> at, double step) {
  std::vector<double> x(at.begin(), at.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = f(x);
    x[i] = orig - step;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace o2o::numkit
