#include "o2o/agents/networks.hpp"

#include <limits>

#include "o2o/error.hpp"

namespace o2o::agents {

CriticEnsemble CriticEnsemble::create(std::size_t size, std::size_t state_dim, std::size_t action_dim,
                                      const std::vector<std::size_t>& hidden, numkit::Activation activation,
                                      Rng& rng) {
  MlpSpec spec;
  spec.widths.push_back(state_dim + action_dim);
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(1);
  spec.activation = activation;
  CriticEnsemble e;
  for (std::size_t i = 0; i < size; ++i) e.members.push_back(ParamVector::glorot(spec, rng));
  e.targets = e.members;
  e.validate();
  return e;
}

void CriticEnsemble::validate() const {
  if (members.size() < 2) throw InvalidArgument("critic ensemble needs at least 2 members");
  if (targets.size() != members.size()) throw InvalidArgument("critic targets do not match members");
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (!members[i].same_shape(members[0]) || !targets[i].same_shape(members[0])) {
      throw InvalidArgument("critic ensemble members differ in shape");
    }
  }
  if (members[0].spec().output_dim() != 1) throw InvalidArgument("critic networks must have one output");
}

ParamVector make_state_net(std::size_t state_dim, const std::vector<std::size_t>& hidden,
                           numkit::Activation activation, Rng& rng) {
  MlpSpec spec;
  spec.widths.push_back(state_dim);
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(1);
  spec.activation = activation;
  return ParamVector::glorot(spec, rng);
}

double state_net_value(const ParamVector& net, std::span<const double> s) { return numkit::mlp_forward(net, s)[0]; }

std::vector<double> critic_input(std::span<const double> s, std::span<const double> a) {
  std::vector<double> x(s.begin(), s.end());
  x.insert(x.end(), a.begin(), a.end());
  return x;
}

double q_value(const ParamVector& q, std::span<const double> s, std::span<const double> a) {
  return numkit::mlp_forward(q, critic_input(s, a))[0];
}

double q_value_grad_a(const ParamVector& q, std::span<const double> s, std::span<const double> a,
                      std::vector<double>& grad_a) {
  const auto tr = numkit::mlp_trace(q, critic_input(s, a));
  const double one = 1.0;
  const auto gi = numkit::mlp_backward(q, tr, std::span<const double>(&one, 1), {});
  grad_a.assign(gi.begin() + static_cast<std::ptrdiff_t>(s.size()), gi.end());
  return tr.output[0];
}

ActionValueFn min_q(const std::vector<ParamVector>& members) {
  return [&members](std::span<const double> s, std::span<const double> a, std::vector<double>* grad_a) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < members.size(); ++j) {
      const double q = q_value(members[j], s, a);
      if (q < best) {
        best = q;
        arg = j;
      }
    }
    if (grad_a) q_value_grad_a(members[arg], s, a, *grad_a);
    return best;
  };
}

ActionValueFn mean_q(const std::vector<ParamVector>& members) {
  return [&members](std::span<const double> s, std::span<const double> a, std::vector<double>* grad_a) {
    const double inv = 1.0 / static_cast<double>(members.size());
    double total = 0.0;
    if (grad_a) grad_a->assign(a.size(), 0.0);
    std::vector<double> g;
    for (const auto& m : members) {
      if (grad_a) {
        total += q_value_grad_a(m, s, a, g);
        for (std::size_t i = 0; i < g.size(); ++i) (*grad_a)[i] += inv * g[i];
      } else {
        total += q_value(m, s, a);
      }
    }
    return total * inv;
  };
}

double min_q_value(const std::vector<ParamVector>& members, std::span<const double> s, std::span<const double> a) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : members) best = std::min(best, q_value(m, s, a));
  return best;
}

}  // namespace o2o::agents
