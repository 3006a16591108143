#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "o2o/diffusion/diffusion.hpp"
#include "o2o/envs/dataset.hpp"
#include "o2o/envs/replay_buffer.hpp"
#include "o2o/error.hpp"
#include "o2o/pipeline/agent.hpp"
#include "o2o/pipeline/metrics.hpp"

namespace o2o::pipeline {

/// A loss or parameter went non-finite; training stopped at `step`.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(std::uint64_t step, std::string loss_name, const std::string& detail)
      : NumericError("training aborted at step " + std::to_string(step) + ": " + loss_name + " is not finite (" +
                     detail + ")"),
        step_(step),
        loss_name_(std::move(loss_name)) {}

  std::uint64_t step() const noexcept { return step_; }
  const std::string& loss_name() const noexcept { return loss_name_; }

 private:
  std::uint64_t step_;
  std::string loss_name_;
};

struct EvalResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> returns;
};

/// Every evaluation of a run uses evaluate_policy(..., derive_seed(seed, kEvalSeedTag)),
/// so successive eval points differ only through the policy.
inline constexpr std::uint64_t kEvalSeedTag = 0xE7A1;

/// Greedy (mean-action) rollouts; episode e resets with derive_seed(seed, e).
/// Returns the mean undiscounted return and its standard error.
EvalResult evaluate_policy(const agents::GaussianPolicy& policy, const envs::EnvSpec& env, std::size_t episodes,
                           std::uint64_t seed);

/// Where a training loop reports. Either member may be empty.
struct MetricsSink {
  MetricsLog* log = nullptr;
  std::string run_id = "run";
};

/// Continues the offline phase of `agent` up to `until_step` gradient steps.
/// Every step's randomness derives from (seed, step), so stopping, saving and
/// resuming reproduces an unbroken run. `score` is required for SMAC with kappa > 0.
void offline_train(AgentCheckpoint& agent, const ExperimentConfig& config, const envs::Dataset& data,
                   const diffusion::ScoreModel* score, std::uint64_t seed, std::uint64_t until_step,
                   const MetricsSink& sink = {});

/// make_agent followed by config.offline_steps steps of offline_train.
AgentCheckpoint offline_pretrain(const ExperimentConfig& config, const envs::Dataset& data,
                                 const diffusion::ScoreModel* score, std::uint64_t seed,
                                 const MetricsSink& sink = {});

/// Rolls out the frozen stochastic policy until the buffer holds `count` transitions.
envs::ReplayBuffer warm_start(const agents::GaussianPolicy& policy, const envs::EnvSpec& env, std::size_t count,
                              std::uint64_t seed, std::size_t capacity = 0);

struct OnlineResult {
  AgentCheckpoint checkpoint;
  /// Online step of every evaluation, starting with 0.
  std::vector<std::uint64_t> eval_steps;
  std::vector<double> eval_returns;
  /// J(pi_1) - J(pi_0), with pi_1 the policy at the first evaluation after step 0
  /// (NaN when online_steps < eval_every).
  double stable_transfer = 0.0;
  std::size_t buffer_size = 0;
};

/// Warm start, then config.online_steps iterations of {environment step, push,
/// mixed batch, one update of config.online_alg}, evaluating every eval_every steps.
/// Optimizer states are replaced by fresh Adam states for the online phase.
OnlineResult online_finetune(const AgentCheckpoint& checkpoint, const ExperimentConfig& config,
                             const envs::Dataset& data, std::uint64_t seed, const MetricsSink& sink = {});

/// Scripted expert plus noise, as configured in config.dataset.
envs::Dataset make_dataset(const ExperimentConfig& config);

/// Trains the action score model on `data` as configured in config.diffusion.
diffusion::ScoreModel train_diffusion(const ExperimentConfig& config, const envs::Dataset& data, std::uint64_t seed,
                                      const MetricsSink& sink = {});

}  // namespace o2o::pipeline
