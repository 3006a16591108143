#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "o2o/envs/dataset.hpp"
#include "o2o/numkit/mlp.hpp"
#include "o2o/optim/optim.hpp"

namespace o2o::diffusion {

using numkit::MlpSpec;
using numkit::ParamVector;

/// Cumulative signal levels alpha_bar[k-1] for k = 1..K, strictly decreasing.
struct NoiseSchedule {
  std::vector<double> alpha_bar;

  std::size_t steps() const noexcept { return alpha_bar.size(); }
  /// alpha_bar for 1-based step k.
  double at(std::size_t k) const { return alpha_bar.at(k - 1); }

  friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;
};

inline constexpr double kCosineOffset = 0.008;

/// alpha_bar_k = f(k)/f(0), f(k) = cos^2(((k/K)+s)/(1+s) * pi/2), clipped to [1e-5, 0.9999].
NoiseSchedule cosine_schedule(std::size_t steps);

/// sqrt(alpha_bar_k) * a0 + sqrt(1 - alpha_bar_k) * noise.
std::vector<double> noise_action(std::span<const double> a0, std::size_t k, const NoiseSchedule& schedule,
                                 std::span<const double> noise);

/// eps(x_k, s, w, k): noise prediction used for training, sampling and scores.
using NoisePredictor =
    std::function<std::vector<double>(std::span<const double> x, std::span<const double> s, double w, std::size_t k)>;

/// Conditional noise-prediction network over actions.
/// Network input: [noised action, state, sinusoidal(k / K), w].
class ScoreModel {
 public:
  ScoreModel() = default;
  ScoreModel(NoiseSchedule schedule, std::size_t state_dim, std::size_t action_dim, std::size_t embed_dim,
             ParamVector params);

  /// Fresh Glorot-initialised model with the given hidden widths.
  static ScoreModel create(NoiseSchedule schedule, std::size_t state_dim, std::size_t action_dim,
                           const std::vector<std::size_t>& hidden, numkit::Activation activation,
                           std::size_t embed_dim, Rng& rng);

  const NoiseSchedule& schedule() const noexcept { return schedule_; }
  std::size_t state_dim() const noexcept { return state_dim_; }
  std::size_t action_dim() const noexcept { return action_dim_; }
  std::size_t embed_dim() const noexcept { return embed_dim_; }
  const ParamVector& params() const noexcept { return params_; }
  ParamVector& params() noexcept { return params_; }

  std::vector<double> network_input(std::span<const double> x, std::span<const double> s, double w,
                                    std::size_t k) const;
  std::vector<double> predict_noise(std::span<const double> x, std::span<const double> s, double w,
                                    std::size_t k) const;
  NoisePredictor predictor() const;

  friend bool operator==(const ScoreModel&, const ScoreModel&) = default;

 private:
  NoiseSchedule schedule_;
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  std::size_t embed_dim_ = 0;
  ParamVector params_;
};

struct DiffusionSample {
  std::vector<double> s;
  std::vector<double> a;
  double w = 1.0;
};

/// Builds training pairs; with rvs disabled every w is 1.
std::vector<DiffusionSample> diffusion_samples(const envs::Dataset& data, bool rvs_enabled);

struct DiffusionLoss {
  double loss = 0.0;
  ParamVector grad;
};

/// Batch mean of ||eps - eps_w(x_k, s, w, k)||^2 with k ~ U{1..K}, eps ~ N(0, I).
DiffusionLoss diffusion_loss(const ScoreModel& model, std::span<const DiffusionSample> batch, std::uint64_t seed);

/// Same draw of (k, eps) as diffusion_loss, evaluated for an arbitrary predictor.
double diffusion_loss_value(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                            std::span<const DiffusionSample> batch, std::uint64_t seed);

/// Raw k = 1 output eps_w(s, a, w, 1), as consumed by the score-matching loss.
std::vector<double> score_at_k1(const ScoreModel& model, std::span<const double> s, std::span<const double> a,
                                double w);

/// -eps_w(s, a, w, 1) / sqrt(1 - alpha_bar_1): an estimate of grad_a log p(a | s, w).
std::vector<double> calibrated_score(const ScoreModel& model, std::span<const double> s, std::span<const double> a,
                                     double w);

struct SampleOptions {
  /// Adds posterior noise at every reverse step; the default chain is deterministic.
  bool stochastic = false;
  std::vector<double> action_low;
  std::vector<double> action_high;
};

/// Reverse chain from x_K ~ N(0, I). Each step predicts x_0, clips it to the
/// action box, and moves to step k-1 (deterministically unless options.stochastic).
std::vector<double> ddpm_sample(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                                std::size_t action_dim, std::span<const double> s, double w,
                                const SampleOptions& options, std::uint64_t seed);

struct TrainOptions {
  std::size_t steps = 2000;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  /// Called every log_every steps with (step, loss) when set.
  std::size_t log_every = 0;
  std::function<void(std::size_t, double)> on_log;
};

/// Adam on the diffusion loss over uniformly drawn minibatches. Returns per-step losses.
std::vector<double> train_score_model(ScoreModel& model, std::span<const DiffusionSample> data,
                                      const TrainOptions& options);

inline constexpr char kScoreModelMagic[9] = "SMACDM01";

void save_score_model(const ScoreModel& model, const std::string& path);
/// Throws ParseError on a bad magic or truncated file.
ScoreModel load_score_model(const std::string& path);

std::string serialize_score_model(const ScoreModel& model);
ScoreModel deserialize_score_model(const std::string& bytes);

}  // namespace o2o::diffusion
