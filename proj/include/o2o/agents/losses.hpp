#pragma once

#include <cstdint>
#include <vector>

#include "o2o/agents/networks.hpp"
#include "o2o/agents/policy.hpp"
#include "o2o/diffusion/diffusion.hpp"
#include "o2o/envs/dataset.hpp"

namespace o2o::agents {

using envs::Batch;

struct LossParams {
  double gamma = 0.99;
  /// Weight of the score-matching regularizer.
  double kappa = 40.0;
  double cql_alpha = 5.0;
  /// IQL expectile tau.
  double expectile = 0.9;
  /// IQL advantage temperature beta.
  double iql_temperature = 1.0;
  double awr_temperature = 1.0;
  /// TD3+BC behaviour-cloning weight beta.
  double td3bc_beta = 2.0;
  /// Target entropy = target_entropy_scale * |A|.
  double target_entropy_scale = -10.0;
  /// TD3 target smoothing noise and its clip, both in units of the action half-range.
  double td3_noise = 0.2;
  double td3_noise_clip = 0.5;
  /// Upper bound on advantage weights (AWR and IQL).
  double weight_clip = 100.0;
  /// Conditioning value passed to eps_omega inside L^SM.
  double score_w = 1.0;

  void validate() const;
  friend bool operator==(const LossParams&, const LossParams&) = default;
};

struct CriticLoss {
  double loss = 0.0;
  /// One gradient per ensemble member.
  std::vector<ParamVector> grads;
  /// Bellman targets y_i (empty for pure penalties).
  std::vector<double> targets;
};

struct PolicyLoss {
  double loss = 0.0;
  ParamVector grad;
  /// Batch mean of log pi on the sampled actions (0 when none were sampled).
  double mean_log_prob = 0.0;
};

/// (1/N) sum_j mean_i (Q_j(s_i, a_i) - y_i)^2 with gradients per member.
CriticLoss regress_critics(const std::vector<ParamVector>& members, const Batch& batch,
                           const std::vector<double>& targets);

/// L^AC: targets r + gamma (1 - done) (min_j Qbar_j(s', a') - entropy_coef log pi(a'|s')), a' ~ pi.
CriticLoss sac_critic_loss(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                           double entropy_coef, double gamma, std::uint64_t seed);

/// L^pi = mean(entropy_coef log pi(a|s) - Q(s, a)) on reparameterized samples.
PolicyLoss sac_policy_loss(const GaussianPolicy& policy, const ActionValueFn& q, const Batch& batch,
                           double entropy_coef, std::uint64_t seed);
PolicyLoss sac_policy_loss(const GaussianPolicy& policy, const CriticEnsemble& critics, const Batch& batch,
                           double entropy_coef, std::uint64_t seed);

/// d/d(log alpha) of -log_alpha * (mean log pi + target_entropy).
double entropy_coef_grad(double mean_log_prob, double target_entropy);

/// Actions for B(s): the first count/2 are policy samples, the rest uniform over
/// the action box. Action k belongs to batch state state_index[k] = k mod n.
struct ActionSet {
  std::vector<std::vector<double>> actions;
  std::vector<std::size_t> state_index;
  std::size_t policy_count = 0;
};

ActionSet sample_B(const GaussianPolicy& policy, const Batch& batch, std::size_t count, std::uint64_t seed);

struct ScoreMatchLoss {
  double loss = 0.0;
  std::vector<ParamVector> critic_grads;
  ParamVector alpha_grad;
};

/// L^SM = mean over members and actions of ||grad_a Q_j(s, a) - alpha_psi(s) eps_omega(s, a, w, 1)||^2.
/// eps_omega is a constant here.
ScoreMatchLoss score_match_loss(const CriticEnsemble& critics, const ParamVector& alpha_net,
                                const diffusion::NoisePredictor& score, double w, const Batch& batch,
                                const ActionSet& actions);

struct SmacCriticLoss {
  double loss = 0.0;
  double ac_loss = 0.0;
  double sm_loss = 0.0;
  std::vector<ParamVector> critic_grads;
  ParamVector alpha_grad;
  std::vector<double> targets;
};

/// kappa L^SM + L^AC. With kappa == 0 the regularizer is not evaluated at all and
/// alpha_grad is zero.
SmacCriticLoss smac_critic_loss(const CriticEnsemble& critics, const ParamVector& alpha_net,
                                const GaussianPolicy& policy, const diffusion::NoisePredictor& score,
                                const Batch& batch, double entropy_coef, const LossParams& params,
                                std::uint64_t seed);

/// mean_j [mean_{a ~ B(s)} Q_j(s, a) - mean_D Q_j(s, a)] with gradients per member.
CriticLoss cql_penalty(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                       std::uint64_t seed);
/// As cql_penalty with the B(s) term min(V^MC(s), Q_j(s, a)). Rejects batches
/// without Monte-Carlo values.
CriticLoss calql_penalty(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                         std::uint64_t seed);

/// L^AC + cql_alpha * penalty (calibrated selects CalQL).
CriticLoss cql_critic_loss(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                           double entropy_coef, const LossParams& params, bool calibrated, std::uint64_t seed);

struct IqlLosses {
  double critic_loss = 0.0;
  std::vector<ParamVector> critic_grads;
  double value_loss = 0.0;
  ParamVector value_grad;
  double policy_loss = 0.0;
  ParamVector policy_grad;
};

/// Critic: (Q_j(s, a) - r - gamma (1 - done) V(s'))^2. Value: expectile loss
/// |tau - 1{u < 0}| u^2 with u = min_j Qbar_j(s, a) - V(s) at dataset actions.
/// Policy: -mean min(exp(u / beta), clip) log pi(a|s).
IqlLosses iql_losses(const CriticEnsemble& critics, const ParamVector& value_net, const GaussianPolicy& policy,
                     const Batch& batch, const LossParams& params);

/// Expectile regression weight |tau - 1{u < 0}|.
double expectile_weight(double u, double tau);

/// Targets use a' = mean action plus clipped Gaussian smoothing noise (both
/// scaled by the action half-range), clipped to the action box.
CriticLoss td3_critic_loss(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                           double gamma, double noise, double noise_clip, std::uint64_t seed);

/// -mean Q(s, mean_action(s)).
PolicyLoss td3_policy_loss(const GaussianPolicy& policy, const ActionValueFn& q, const Batch& batch);

struct Td3Losses {
  CriticLoss critic;
  PolicyLoss policy;
};

Td3Losses td3_losses(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                     const LossParams& params, std::uint64_t seed);

/// mean[-Q(s, a') / sg(mean |Q(s, a')|) + beta ||a' - a||^2] with a' the mean action.
PolicyLoss td3bc_policy_loss(const GaussianPolicy& policy, const ActionValueFn& q, const Batch& batch, double beta);

/// -mean min(exp(A / temperature), clip) log pi(a|s), A = Q(s, a) - Q(s, a_pi),
/// a_pi ~ pi(s), with Q the ensemble mean. Weights are constants.
PolicyLoss awr_policy_loss(const GaussianPolicy& policy, const ActionValueFn& q, const Batch& batch,
                           double temperature, double weight_clip, std::uint64_t seed);

}  // namespace o2o::agents
