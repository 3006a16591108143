#include "o2o/diffusion/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "o2o/binary_io.hpp"
#include "o2o/error.hpp"

namespace o2o::diffusion {

namespace {

void time_embedding(std::size_t k, std::size_t steps, std::size_t dim, double* out) {
  const double t = static_cast<double>(k) / static_cast<double>(steps);
  const std::size_t pairs = dim / 2;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double f = std::numbers::pi * std::ldexp(1.0, static_cast<int>(i));
    out[2 * i] = std::sin(f * t);
    out[2 * i + 1] = std::cos(f * t);
  }
  if (dim % 2) out[dim - 1] = t;
}

void draw_step_and_noise(Rng& rng, std::size_t steps, std::size_t action_dim, std::size_t& k,
                         std::vector<double>& eps) {
  k = 1 + rng.uniform_index(steps);
  eps.resize(action_dim);
  for (double& e : eps) e = rng.normal();
}

}  // namespace

NoiseSchedule cosine_schedule(std::size_t steps) {
  if (steps < 2) throw InvalidArgument("cosine schedule needs K >= 2");
  const double s = kCosineOffset;
  auto f = [&](double k) {
    const double c = std::cos((k / static_cast<double>(steps) + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  NoiseSchedule sched;
  const double f0 = f(0.0);
  for (std::size_t k = 1; k <= steps; ++k) {
    sched.alpha_bar.push_back(std::clamp(f(static_cast<double>(k)) / f0, 1e-5, 0.9999));
  }
  return sched;
}

std::vector<double> noise_action(std::span<const double> a0, std::size_t k, const NoiseSchedule& schedule,
                                 std::span<const double> noise) {
  if (k < 1 || k > schedule.steps()) throw InvalidArgument("diffusion step out of range");
  if (noise.size() != a0.size()) throw InvalidArgument("noise length mismatch");
  const double ab = schedule.at(k);
  const double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
  std::vector<double> x(a0.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = sa * a0[i] + sn * noise[i];
  return x;
}

ScoreModel::ScoreModel(NoiseSchedule schedule, std::size_t state_dim, std::size_t action_dim,
                       std::size_t embed_dim, ParamVector params)
    : schedule_(std::move(schedule)),
      state_dim_(state_dim),
      action_dim_(action_dim),
      embed_dim_(embed_dim),
      params_(std::move(params)) {
  if (params_.spec().input_dim() != action_dim_ + state_dim_ + embed_dim_ + 1 ||
      params_.spec().output_dim() != action_dim_) {
    throw InvalidArgument("score network shape does not match (state, action, embedding) dims");
  }
  if (schedule_.steps() < 2) throw InvalidArgument("score model needs a schedule with K >= 2");
}

ScoreModel ScoreModel::create(NoiseSchedule schedule, std::size_t state_dim, std::size_t action_dim,
                              const std::vector<std::size_t>& hidden, numkit::Activation activation,
                              std::size_t embed_dim, Rng& rng) {
  MlpSpec spec;
  spec.widths.push_back(action_dim + state_dim + embed_dim + 1);
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(action_dim);
  spec.activation = activation;
  spec.output = numkit::OutputTransform::identity;
  return ScoreModel(std::move(schedule), state_dim, action_dim, embed_dim, ParamVector::glorot(spec, rng));
}

std::vector<double> ScoreModel::network_input(std::span<const double> x, std::span<const double> s, double w,
                                              std::size_t k) const {
  if (x.size() != action_dim_ || s.size() != state_dim_) throw InvalidArgument("score model input dims mismatch");
  if (k < 1 || k > schedule_.steps()) throw InvalidArgument("diffusion step out of range");
  std::vector<double> in(action_dim_ + state_dim_ + embed_dim_ + 1);
  std::copy(x.begin(), x.end(), in.begin());
  std::copy(s.begin(), s.end(), in.begin() + static_cast<std::ptrdiff_t>(action_dim_));
  time_embedding(k, schedule_.steps(), embed_dim_, in.data() + action_dim_ + state_dim_);
  in.back() = w;
  return in;
}

std::vector<double> ScoreModel::predict_noise(std::span<const double> x, std::span<const double> s, double w,
                                              std::size_t k) const {
  return numkit::mlp_forward(params_, network_input(x, s, w, k));
}

NoisePredictor ScoreModel::predictor() const {
  return [this](std::span<const double> x, std::span<const double> s, double w, std::size_t k) {
    return predict_noise(x, s, w, k);
  };
}

std::vector<DiffusionSample> diffusion_samples(const envs::Dataset& data, bool rvs_enabled) {
  std::vector<DiffusionSample> out;
  out.reserve(data.num_transitions());
  for (std::size_t i = 0; i < data.num_transitions(); ++i) {
    const auto& tr = data.transition(i);
    out.push_back({tr.s, tr.a, rvs_enabled ? data.w(i) : 1.0});
  }
  return out;
}

DiffusionLoss diffusion_loss(const ScoreModel& model, std::span<const DiffusionSample> batch, std::uint64_t seed) {
  if (batch.empty()) throw InvalidArgument("diffusion loss needs a nonempty batch");
  DiffusionLoss out{0.0, ParamVector(model.params().spec())};
  Rng rng(seed);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> eps;
  std::size_t k = 0;
  for (const auto& item : batch) {
    draw_step_and_noise(rng, model.schedule().steps(), model.action_dim(), k, eps);
    const auto x = noise_action(item.a, k, model.schedule(), eps);
    const auto tr = numkit::mlp_trace(model.params(), model.network_input(x, item.s, item.w, k));
    std::vector<double> up(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const double d = eps[i] - tr.output[i];
      out.loss += d * d * inv_n;
      up[i] = -2.0 * d * inv_n;
    }
    numkit::mlp_backward(model.params(), tr, up, out.grad.values());
  }
  if (!std::isfinite(out.loss)) throw NumericError("non-finite diffusion loss");
  return out;
}

double diffusion_loss_value(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                            std::span<const DiffusionSample> batch, std::uint64_t seed) {
  if (batch.empty()) throw InvalidArgument("diffusion loss needs a nonempty batch");
  Rng rng(seed);
  double loss = 0.0;
  std::vector<double> eps;
  std::size_t k = 0;
  for (const auto& item : batch) {
    draw_step_and_noise(rng, schedule.steps(), item.a.size(), k, eps);
    const auto x = noise_action(item.a, k, schedule, eps);
    const auto pred = predictor(x, item.s, item.w, k);
    for (std::size_t i = 0; i < eps.size(); ++i) loss += (eps[i] - pred[i]) * (eps[i] - pred[i]);
  }
  loss /= static_cast<double>(batch.size());
  if (!std::isfinite(loss)) throw NumericError("non-finite diffusion loss");
  return loss;
}

std::vector<double> score_at_k1(const ScoreModel& model, std::span<const double> s, std::span<const double> a,
                                double w) {
  return model.predict_noise(a, s, w, 1);
}

std::vector<double> calibrated_score(const ScoreModel& model, std::span<const double> s, std::span<const double> a,
                                     double w) {
  auto eps = score_at_k1(model, s, a, w);
  const double scale = -1.0 / std::sqrt(1.0 - model.schedule().at(1));
  for (double& e : eps) e *= scale;
  return eps;
}

std::vector<double> ddpm_sample(const NoisePredictor& predictor, const NoiseSchedule& schedule,
                                std::size_t action_dim, std::span<const double> s, double w,
                                const SampleOptions& options, std::uint64_t seed) {
  const bool clip = !options.action_low.empty();
  if (clip && (options.action_low.size() != action_dim || options.action_high.size() != action_dim)) {
    throw InvalidArgument("sample bounds do not match action_dim");
  }
  auto clip_to_box = [&](std::vector<double>& v) {
    if (!clip) return;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], options.action_low[i], options.action_high[i]);
  };
  Rng rng(seed);
  std::vector<double> x(action_dim);
  for (double& v : x) v = rng.normal();
  for (std::size_t k = schedule.steps(); k >= 1; --k) {
    const double ab = schedule.at(k);
    const auto eps = predictor(x, s, w, k);
    std::vector<double> x0(action_dim);
    for (std::size_t i = 0; i < action_dim; ++i) x0[i] = (x[i] - std::sqrt(1.0 - ab) * eps[i]) / std::sqrt(ab);
    clip_to_box(x0);
    if (k == 1) {
      x = std::move(x0);
      break;
    }
    const double abp = schedule.at(k - 1);
    if (options.stochastic) {
      const double beta = 1.0 - ab / abp;
      const double c0 = std::sqrt(abp) * beta / (1.0 - ab);
      const double ck = std::sqrt(1.0 - beta) * (1.0 - abp) / (1.0 - ab);
      const double sd = std::sqrt(beta * (1.0 - abp) / (1.0 - ab));
      for (std::size_t i = 0; i < action_dim; ++i) x[i] = c0 * x0[i] + ck * x[i] + sd * rng.normal();
    } else {
      for (std::size_t i = 0; i < action_dim; ++i) {
        const double e = (x[i] - std::sqrt(ab) * x0[i]) / std::sqrt(1.0 - ab);
        x[i] = std::sqrt(abp) * x0[i] + std::sqrt(1.0 - abp) * e;
      }
    }
  }
  clip_to_box(x);
  for (double v : x)
    if (!std::isfinite(v)) throw NumericError("non-finite diffusion sample");
  return x;
}

std::vector<double> train_score_model(ScoreModel& model, std::span<const DiffusionSample> data,
                                      const TrainOptions& options) {
  if (data.empty()) throw InvalidArgument("cannot train a score model on empty data");
  auto opt = optim::OptState::adam(model.params().size(), options.learning_rate);
  Rng rng(derive_seed(options.seed, 0xD1FF));
  std::vector<double> losses;
  losses.reserve(options.steps);
  std::vector<DiffusionSample> batch(options.batch_size);
  for (std::size_t step = 0; step < options.steps; ++step) {
    for (auto& b : batch) b = data[rng.uniform_index(data.size())];
    const auto res = diffusion_loss(model, batch, rng.next_u64());
    optim::optimizer_update(opt, model.params(), res.grad);
    losses.push_back(res.loss);
    if (options.on_log && options.log_every && (step + 1) % options.log_every == 0) options.on_log(step + 1, res.loss);
  }
  return losses;
}

std::string serialize_score_model(const ScoreModel& model) {
  BinaryWriter w;
  w.bytes(kScoreModelMagic, 8);
  w.f64s(model.schedule().alpha_bar);
  w.u64(model.state_dim());
  w.u64(model.action_dim());
  w.u64(model.embed_dim());
  const auto& spec = model.params().spec();
  w.u64(spec.widths.size());
  for (std::size_t x : spec.widths) w.u64(x);
  w.u8(static_cast<std::uint8_t>(spec.activation));
  w.u8(static_cast<std::uint8_t>(spec.output));
  w.f64s(model.params().values());
  return w.data();
}

ScoreModel deserialize_score_model(const std::string& bytes) {
  BinaryReader r(bytes);
  char magic[8];
  r.bytes(magic, 8);
  if (std::string(magic, 8) != std::string(kScoreModelMagic, 8)) {
    throw ParseError("not a score model file (bad magic '" + std::string(magic, 8) + "')", 0, 0);
  }
  NoiseSchedule sched{r.f64s()};
  const auto state_dim = r.u64();
  const auto action_dim = r.u64();
  const auto embed_dim = r.u64();
  MlpSpec spec;
  const auto nw = r.u64();
  if (nw > 64) throw ParseError("implausible layer count in score model", 0, r.position());
  for (std::uint64_t i = 0; i < nw; ++i) spec.widths.push_back(r.u64());
  spec.activation = static_cast<numkit::Activation>(r.u8());
  spec.output = static_cast<numkit::OutputTransform>(r.u8());
  auto values = r.f64s();
  return ScoreModel(std::move(sched), state_dim, action_dim, embed_dim, ParamVector(spec, std::move(values)));
}

void save_score_model(const ScoreModel& model, const std::string& path) {
  write_file(path, serialize_score_model(model));
}

ScoreModel load_score_model(const std::string& path) { return deserialize_score_model(read_file(path)); }

}  // namespace o2o::diffusion
