#pragma once

#include <functional>
#include <span>
#include <vector>

#include "o2o/numkit/mlp.hpp"

namespace o2o::agents {

using numkit::MlpSpec;
using numkit::ParamVector;

/// Q_theta(s, a) members and their Polyak targets. Network input is [s, a].
struct CriticEnsemble {
  std::vector<ParamVector> members;
  std::vector<ParamVector> targets;

  static CriticEnsemble create(std::size_t size, std::size_t state_dim, std::size_t action_dim,
                               const std::vector<std::size_t>& hidden, numkit::Activation activation, Rng& rng);

  std::size_t size() const { return members.size(); }
  std::size_t input_dim() const { return members.front().spec().input_dim(); }
  void validate() const;

  friend bool operator==(const CriticEnsemble&, const CriticEnsemble&) = default;
};

/// Scalar state network: alpha_psi(s) for SMAC, V_psi(s) for IQL.
ParamVector make_state_net(std::size_t state_dim, const std::vector<std::size_t>& hidden,
                           numkit::Activation activation, Rng& rng);

double state_net_value(const ParamVector& net, std::span<const double> s);

std::vector<double> critic_input(std::span<const double> s, std::span<const double> a);

double q_value(const ParamVector& q, std::span<const double> s, std::span<const double> a);

/// Q value and its action gradient.
double q_value_grad_a(const ParamVector& q, std::span<const double> s, std::span<const double> a,
                      std::vector<double>& grad_a);

/// Q(s, a) with optional action gradient, so policy objectives can run against
/// either a critic ensemble or an analytic function.
using ActionValueFn =
    std::function<double(std::span<const double> s, std::span<const double> a, std::vector<double>* grad_a)>;

/// min_j Q_j(s, a); the gradient is that of the first minimizing member.
ActionValueFn min_q(const std::vector<ParamVector>& members);
/// (1/N) sum_j Q_j(s, a).
ActionValueFn mean_q(const std::vector<ParamVector>& members);

double min_q_value(const std::vector<ParamVector>& members, std::span<const double> s, std::span<const double> a);

}  // namespace o2o::agents
