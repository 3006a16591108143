#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace o2o::numkit {

/// Scalar function of a flat vector. When `grad` is non-null it must be filled
/// with the analytic gradient (same length as the argument).
using DifferentiableFn = std::function<double(std::span<const double> x, std::vector<double>* grad)>;

struct FiniteDiffOptions {
  double step = 1e-5;
  /// 0 checks every coordinate; otherwise at most this many, sampled without
  /// replacement (never fewer than 64 unless the vector is shorter).
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

/// Compares the analytic gradient of f at x against central differences.
/// Returns max_i |g_i - fd_i| / max(||g||_inf, ||fd||_inf) over the checked
/// coordinates, and 0 when both gradients vanish.
double finite_diff_check(const DifferentiableFn& f, std::span<const double> at,
                         const FiniteDiffOptions& options = {});

/// Central-difference gradient of a value-only function, for oracles in tests.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> at, double step);

}  // namespace o2o::numkit
