#include "o2o/optim/optim.hpp"

#include <algorithm>
#include <cmath>

#include "o2o/error.hpp"

namespace o2o::optim {

namespace {

void require_finite(std::span<const double> g) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw NumericError("non-finite gradient at coordinate " + std::to_string(i));
    }
  }
}

void require_sizes(const OptState& s, std::size_t np, std::size_t ng) {
  if (np != ng) throw InvalidArgument("parameter and gradient lengths differ");
  if (s.m.size() != np) throw InvalidArgument("optimizer buffers do not match parameter length");
}

}  // namespace

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "muon"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "muon") return OptimizerKind::muon;
  throw InvalidArgument("unknown optimizer '" + std::string(name) + "'");
}

OptState OptState::adam(std::size_t n, double lr) {
  OptState s;
  s.kind = OptimizerKind::adam;
  s.learning_rate = lr;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

OptState OptState::muon(std::size_t n, double lr) {
  OptState s;
  s.kind = OptimizerKind::muon;
  s.learning_rate = lr;
  s.m.assign(n, 0.0);
  return s;
}

OptState OptState::make(OptimizerKind kind, std::size_t n, double lr) {
  return kind == OptimizerKind::adam ? adam(n, lr) : muon(n, lr);
}

Matrix newton_schulz_orthogonalize(const Matrix& g, int iterations) {
  const double fro = g.frobenius_norm();
  if (!(fro > 0.0)) throw InvalidArgument("cannot orthogonalize a zero matrix");
  if (!std::isfinite(fro)) throw NumericError("non-finite matrix passed to Newton-Schulz");
  const bool transpose = g.rows() > g.cols();
  Matrix x = transpose ? g.transposed() : g;
  x *= 1.0 / fro;
  // When every nonzero singular value is the same (orthogonal, rank-1 and similar
  // inputs), X / sigma is already U V^T. The quintic coefficients oscillate
  // around 1 rather than converging, so such inputs are returned exactly.
  {
    const Matrix p = numkit::gram(x);
    const Matrix p2 = p * p;
    double tr = 0.0, tr2 = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
      tr += p(i, i);
      tr2 += p2(i, i);
    }
    const double s2 = tr2 / tr;
    if ((p2 - s2 * p).max_abs() <= kIsotropicTolerance * s2 * s2) {
      x *= 1.0 / std::sqrt(s2);
      return transpose ? x.transposed() : x;
    }
  }
  for (int it = 0; it < iterations; ++it) {
    const bool last = it + 1 == iterations && iterations > 1;
    const double ca = last ? kNsPolishA : kNsA;
    const double cb = last ? kNsPolishB : kNsB;
    const double cc = last ? kNsPolishC : kNsC;
    const Matrix a = numkit::gram(x);
    Matrix b = cb * a + cc * (a * a);
    x = ca * x + b * x;
  }
  return transpose ? x.transposed() : x;
}

void adam_update(OptState& s, std::span<double> params, std::span<const double> grad) {
  require_sizes(s, params.size(), grad.size());
  if (s.v.size() != params.size()) throw InvalidArgument("adam second-moment buffer length mismatch");
  require_finite(grad);
  ++s.step_count;
  const double t = static_cast<double>(s.step_count);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.eps);
  }
}

void muon_update(OptState& s, std::span<double> params, std::span<const double> grad,
                 std::span<const ParamBlock> blocks) {
  require_sizes(s, params.size(), grad.size());
  require_finite(grad);
  ++s.step_count;
  std::vector<double> dir(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.momentum * s.m[i] + grad[i];
    dir[i] = s.nesterov ? grad[i] + s.momentum * s.m[i] : s.m[i];
  }
  std::vector<bool> covered(params.size(), false);
  for (const ParamBlock& b : blocks) {
    if (b.offset + b.size() > params.size()) throw InvalidArgument("parameter block out of range");
    for (std::size_t i = 0; i < b.size(); ++i) covered[b.offset + i] = true;
    const bool matrix_like = !b.is_bias && b.rows > 1 && b.cols > 1;
    if (!matrix_like) continue;
    Matrix d(b.rows, b.cols,
             std::vector<double>(dir.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                 dir.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size())));
    if (d.frobenius_norm() == 0.0) {
      for (std::size_t i = 0; i < b.size(); ++i) dir[b.offset + i] = 0.0;
      continue;
    }
    const Matrix o = newton_schulz_orthogonalize(d, s.ns_iterations);
    std::copy(o.data().begin(), o.data().end(), dir.begin() + static_cast<std::ptrdiff_t>(b.offset));
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= s.learning_rate * dir[i];
}

void optimizer_update(OptState& state, ParamVector& params, const ParamVector& grad) {
  if (!params.same_shape(grad)) throw InvalidArgument("gradient shape does not match parameters");
  if (state.kind == OptimizerKind::adam) {
    adam_update(state, params.values(), grad.values());
  } else {
    const auto blocks = numkit::param_blocks(params.spec());
    muon_update(state, params.values(), grad.values(), blocks);
  }
}

std::pair<ParamVector, OptState> adam_step(const OptState& state, const ParamVector& params,
                                           const ParamVector& grad) {
  if (state.kind != OptimizerKind::adam) throw InvalidArgument("adam_step called with a muon state");
  std::pair<ParamVector, OptState> out{params, state};
  optimizer_update(out.second, out.first, grad);
  return out;
}

std::pair<ParamVector, OptState> muon_step(const OptState& state, const ParamVector& params,
                                           const ParamVector& grad) {
  if (state.kind != OptimizerKind::muon) throw InvalidArgument("muon_step called with an adam state");
  std::pair<ParamVector, OptState> out{params, state};
  optimizer_update(out.second, out.first, grad);
  return out;
}

ParamVector polyak_update(const ParamVector& target, const ParamVector& online, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw InvalidArgument("polyak rate must lie in (0, 1]");
  if (target.size() != online.size()) throw InvalidArgument("polyak update length mismatch");
  ParamVector out = target;
  auto t = out.values();
  auto o = online.values();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rate * o[i] + (1.0 - rate) * t[i];
  return out;
}

}  // namespace o2o::optim
