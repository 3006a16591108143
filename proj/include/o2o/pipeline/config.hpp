#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "o2o/agents/losses.hpp"
#include "o2o/envs/env.hpp"
#include "o2o/optim/optim.hpp"

namespace o2o::pipeline {

enum class OfflineAlg { smac, sac, cql, calql, iql, td3bc };
enum class OnlineAlg { sac, td3, td3bc, awr };

std::string to_string(OfflineAlg a);
std::string to_string(OnlineAlg a);
OfflineAlg parse_offline_alg(std::string_view name);
OnlineAlg parse_online_alg(std::string_view name);

struct NetworkConfig {
  std::vector<std::size_t> critic_hidden{64, 64};
  std::vector<std::size_t> policy_hidden{64, 64};
  std::vector<std::size_t> alpha_hidden{32, 32};
  std::vector<std::size_t> value_hidden{64, 64};
  numkit::Activation critic_activation = numkit::Activation::tanh;
  numkit::Activation policy_activation = numkit::Activation::relu;
  numkit::Activation alpha_activation = numkit::Activation::relu;
  numkit::Activation value_activation = numkit::Activation::relu;
  std::size_t ensemble_size = 2;
  /// Initial output bias of alpha_psi. eps_omega points away from likely actions,
  /// so a critic whose action gradient follows the dataset score needs alpha_psi < 0.
  double alpha_init_bias = -1.0;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct LearningRates {
  double critic = 3e-4;
  double policy = 1e-4;
  double alpha = 1e-4;
  double value = 3e-4;
  double entropy = 3e-4;
  /// Multiplies every learning rate of a Muon-optimized network.
  double muon_scale = 1.0;

  friend bool operator==(const LearningRates&, const LearningRates&) = default;
};

struct DatasetConfig {
  std::size_t episodes = 200;
  /// Std of the Gaussian noise added to the scripted expert.
  double noise_std = 0.5;
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct DiffusionConfig {
  std::size_t steps = 32;
  std::vector<std::size_t> hidden{128, 128};
  std::size_t embed_dim = 8;
  std::size_t train_steps = 3000;
  std::size_t batch = 256;
  double learning_rate = 1e-3;

  friend bool operator==(const DiffusionConfig&, const DiffusionConfig&) = default;
};

struct ExperimentConfig {
  std::string env = "reach2d";
  OfflineAlg offline_alg = OfflineAlg::smac;
  OnlineAlg online_alg = OnlineAlg::sac;
  optim::OptimizerKind optimizer = optim::OptimizerKind::muon;
  std::size_t offline_steps = 20000;
  std::size_t online_steps = 10000;
  std::size_t offline_batch = 64;
  std::size_t online_batch = 256;
  std::size_t warm_start_count = 5000;
  double mix = 0.5;
  std::size_t eval_every = 250;
  std::size_t eval_episodes = 10;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3};
  bool rvs_enabled = true;
  /// 0 keeps every online transition.
  std::size_t replay_capacity = 0;
  /// lambda_Q of the target-critic Polyak update.
  double polyak = 0.005;
  double initial_entropy_coef = 1.0;
  /// TD3-family actors update once every this many critic steps.
  std::size_t td3_policy_delay = 2;
  /// Exploration noise of TD3-family actors, in units of the action half-range.
  double td3_explore_noise = 0.1;
  agents::LossParams loss;
  NetworkConfig network;
  LearningRates lr;
  DatasetConfig dataset;
  DiffusionConfig diffusion;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  envs::EnvSpec env_spec() const { return envs::make_env(env); }
  double target_entropy() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

nlohmann::json to_json(const ExperimentConfig& config);

/// Fields absent from `doc` keep their defaults. Unknown keys, wrong types and
/// failed validation raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc);

/// Applies "dotted.path=value" overrides in order (last wins). The value is read
/// as JSON when it parses, otherwise as a string. Unknown paths raise ConfigError.
nlohmann::json apply_overrides(nlohmann::json doc, const std::vector<std::string>& overrides);

/// Reads a JSON file (empty path gives the defaults), applies overrides, validates.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace o2o::pipeline
