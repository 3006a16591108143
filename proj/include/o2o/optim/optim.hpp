#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "o2o/numkit/matrix.hpp"
#include "o2o/numkit/mlp.hpp"

namespace o2o::optim {

using numkit::Matrix;
using numkit::ParamBlock;
using numkit::ParamVector;

enum class OptimizerKind { adam, muon };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

/// Quintic Newton-Schulz coefficients (a, b, c) used by Muon.
inline constexpr double kNsA = 3.4445;
inline constexpr double kNsB = -4.7750;
inline constexpr double kNsC = 2.0315;
/// Classical quintic (f(1) = 1, f'(1) = f''(1) = 0) used for the final
/// iteration. The reference coefficients alone settle into a cycle whose lower
/// edge is about 0.68.
inline constexpr double kNsPolishA = 15.0 / 8.0;
inline constexpr double kNsPolishB = -10.0 / 8.0;
inline constexpr double kNsPolishC = 3.0 / 8.0;

struct OptState {
  OptimizerKind kind = OptimizerKind::adam;
  std::uint64_t step_count = 0;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Muon momentum and lookahead.
  double momentum = 0.95;
  bool nesterov = true;
  int ns_iterations = 5;
  /// Adam first moment / Muon momentum buffer.
  std::vector<double> m;
  /// Adam second moment (empty for Muon).
  std::vector<double> v;

  static OptState adam(std::size_t n, double lr);
  static OptState muon(std::size_t n, double lr);
  static OptState make(OptimizerKind kind, std::size_t n, double lr);

  friend bool operator==(const OptState&, const OptState&) = default;
};

/// Relative tolerance on ||P^2 - sigma^2 P||_max (P = X X^T) for treating all
/// nonzero singular values as equal.
inline constexpr double kIsotropicTolerance = 1e-9;

/// Approximates U V^T of the SVD of g: the input is scaled by its Frobenius
/// norm, then the quintic iteration X <- aX + b(XX^T)X + c(XX^T)^2 X runs on the
/// orientation with rows <= cols (reference coefficients, then one polish step). Inputs whose nonzero singular values all
/// coincide skip the iteration and return X / sigma, which is exact.
/// Throws InvalidArgument on an all-zero input.
Matrix newton_schulz_orthogonalize(const Matrix& g, int iterations = 5);

/// In-place Adam update with bias correction.
void adam_update(OptState& state, std::span<double> params, std::span<const double> grad);

/// In-place Muon update. Weight blocks with both dimensions > 1 step along the
/// orthogonalized momentum direction; biases and singleton-dimension blocks use
/// momentum SGD with the same momentum rule.
void muon_update(OptState& state, std::span<double> params, std::span<const double> grad,
                 std::span<const ParamBlock> blocks);

/// Dispatches on state.kind.
void optimizer_update(OptState& state, ParamVector& params, const ParamVector& grad);

std::pair<ParamVector, OptState> adam_step(const OptState& state, const ParamVector& params,
                                           const ParamVector& grad);
std::pair<ParamVector, OptState> muon_step(const OptState& state, const ParamVector& params,
                                           const ParamVector& grad);

/// target <- rate * online + (1 - rate) * target, with 0 < rate <= 1.
ParamVector polyak_update(const ParamVector& target, const ParamVector& online, double rate);

}  // namespace o2o::optim
