// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// if any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "o2o/agents/losses.hpp"
#include "o2o/agents/maxent.hpp"
#include "o2o/analysis/landscape.hpp"
#include "o2o/analysis/regret_table.hpp"
#include "o2o/cli/cli.hpp"
#include "o2o/diffusion/diffusion.hpp"
#include "o2o/optim/optim.hpp"
#include "o2o/pipeline/training.hpp"
#include "test_helpers.hpp"

namespace fs = std::filesystem;
using namespace o2o;
using namespace o2o::agents;
using numkit::ParamVector;
using o2o::testing::fd_error;
using o2o::testing::random_batch;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- 1

Verdict aggregate_table() {
  struct Cell {
    const char* off;
    const char* on;
    double reference;
  };
  const Cell reference[] = {
      {"calql", "awr", 0.482}, {"calql", "sac", 0.448}, {"calql", "td3", 0.442}, {"calql", "td3bc", 0.614},
      {"iql", "awr", 0.508},   {"iql", "sac", 0.471},   {"iql", "td3", 0.653},   {"iql", "td3bc", 0.494},
      {"smac", "awr", 0.380},  {"smac", "sac", 0.031},  {"smac", "td3", 0.090},  {"smac", "td3bc", 0.226},
      {"td3bc", "awr", 0.654}, {"td3bc", "sac", 0.962}, {"td3bc", "td3", 0.545}, {"td3bc", "td3bc", 0.562},
  };
  const auto records =
      analysis::parse_regret_csv(slurp(fs::path(O2O_SOURCE_DIR) / "data" / "regret_cells.csv"));
  const auto table = analysis::aggregate_normalized_regret(records);
  double worst = 0.0;
  std::string where;
  for (const auto& c : reference) {
    const double d = std::abs(table.average(c.off, c.on) - c.reference);
    if (d >= worst) worst = d, where = std::string(c.off) + "x" + c.on;
  }
  return {worst <= 0.005 && table.aggregate.size() == 16,
          "16 cells, max |diff| " + fmt("%.4f", worst) + " (" + where + "), tolerance 0.005"};
}

// ---------------------------------------------------------------- 2

CriticEnsemble with_member(CriticEnsemble c, std::size_t j, const ParamVector& p) {
  c.members[j] = p;
  return c;
}

GaussianPolicy with_params(GaussianPolicy pol, const ParamVector& p) {
  pol.params = p;
  return pol;
}

// One random small problem: dims, batch, widths and squashing all vary.
struct Problem {
  std::size_t sd, ad;
  Batch batch;
  CriticEnsemble critics;
  GaussianPolicy policy;
  ParamVector state_net;
  diffusion::ScoreModel score;
};

Problem random_problem(Rng& rng) {
  Problem p;
  p.sd = 1 + rng.uniform_index(3);
  p.ad = 1 + rng.uniform_index(2);
  p.batch = random_batch(rng, p.sd, p.ad, 2 + rng.uniform_index(5));
  const std::size_t members = 2 + rng.uniform_index(2);
  p.critics = o2o::testing::small_critics(rng, p.sd, p.ad, members, {3 + rng.uniform_index(5)});
  p.policy = o2o::testing::small_policy(rng, p.sd, p.ad, rng.uniform() < 0.5, numkit::Activation::tanh,
                                        {3 + rng.uniform_index(4)});
  p.state_net = make_state_net(p.sd, {2 + rng.uniform_index(4)}, numkit::Activation::tanh, rng);
  o2o::testing::jitter(p.state_net, rng, 0.2);
  p.score = diffusion::ScoreModel::create(diffusion::cosine_schedule(6), p.sd, p.ad, {4}, numkit::Activation::tanh,
                                          4, rng);
  o2o::testing::jitter(p.score.params(), rng, 0.3);
  return p;
}

Verdict gradient_suite() {
  constexpr double kTol = 1e-5;
  constexpr int kConfigs = 100;
  // name -> worst relative error over all configurations
  std::vector<std::pair<std::string, double>> worst;
  auto record = [&](const std::string& name, double err) {
    for (auto& [n, w] : worst) {
      if (n == name) {
        w = std::max(w, std::isfinite(err) ? err : 1e300);
        return;
      }
    }
    worst.emplace_back(name, std::isfinite(err) ? err : 1e300);
  };

  Rng rng(2024);
  for (int trial = 0; trial < kConfigs; ++trial) {
    auto pr = random_problem(rng);
    const auto& batch = pr.batch;
    const auto& critics = pr.critics;
    const auto& pol = pr.policy;
    const std::size_t j = rng.uniform_index(critics.size());
    const std::uint64_t seed = rng.next_u64();
    const double coef = rng.uniform(0.05, 1.0);
    LossParams lp;
    lp.gamma = rng.uniform(0.5, 0.99);
    lp.kappa = rng.uniform(0.5, 50.0);
    lp.cql_alpha = rng.uniform(0.5, 5.0);
    lp.expectile = rng.uniform(0.55, 0.95);
    lp.iql_temperature = rng.uniform(0.5, 3.0);
    lp.td3bc_beta = rng.uniform(0.5, 3.0);
    lp.score_w = rng.uniform();
    const auto eps = pr.score.predictor();

    record("L^AC critic", fd_error(critics.members[j], [&](const ParamVector& p, ParamVector* g) {
             const auto l = sac_critic_loss(with_member(critics, j, p), pol, batch, coef, lp.gamma, seed);
             if (g) *g = l.grads[j];
             return l.loss;
           }));
    record("L^pi policy", fd_error(pol.params, [&](const ParamVector& p, ParamVector* g) {
             const auto l = sac_policy_loss(with_params(pol, p), critics, batch, coef, seed);
             if (g) *g = l.grad;
             return l.loss;
           }));

    const auto acts = sample_B(pol, batch, 2 * (1 + rng.uniform_index(4)), seed);
    record("L^SM critic", fd_error(critics.members[j], [&](const ParamVector& p, ParamVector* g) {
             const auto l = score_match_loss(with_member(critics, j, p), pr.state_net, eps, lp.score_w, batch, acts);
             if (g) *g = l.critic_grads[j];
             return l.loss;
           }));
    record("L^SM alpha", fd_error(pr.state_net, [&](const ParamVector& p, ParamVector* g) {
             const auto l = score_match_loss(critics, p, eps, lp.score_w, batch, acts);
             if (g) *g = l.alpha_grad;
             return l.loss;
           }));
    record("L^SMAC critic", fd_error(critics.members[j], [&](const ParamVector& p, ParamVector* g) {
             const auto l = smac_critic_loss(with_member(critics, j, p), pr.state_net, pol, eps, batch, coef, lp, seed);
             if (g) *g = l.critic_grads[j];
             return l.loss;
           }));
    record("L^SMAC alpha", fd_error(pr.state_net, [&](const ParamVector& p, ParamVector* g) {
             const auto l = smac_critic_loss(critics, p, pol, eps, batch, coef, lp, seed);
             if (g) *g = l.alpha_grad;
             return l.loss;
           }));

    for (bool calibrated : {false, true}) {
      const std::string name = calibrated ? "CalQL" : "CQL";
      record(name + " penalty", fd_error(critics.members[j], [&](const ParamVector& p, ParamVector* g) {
               const auto c = with_member(critics, j, p);
               const auto l = calibrated ? calql_penalty(c, pol, batch, seed) : cql_penalty(c, pol, batch, seed);
               if (g) *g = l.grads[j];
               return l.loss;
             }));
      record(name + " critic", fd_error(critics.members[j], [&](const ParamVector& p, ParamVector* g) {
               const auto l = cql_critic_loss(with_member(critics, j, p), pol, batch, coef, lp, calibrated, seed);
               if (g) *g = l.grads[j];
               return l.loss;
             }));
    }

    record("IQL critic", fd_error(critics.members[j], [&](const ParamVector& p, ParamVector* g) {
             const auto l = iql_losses(with_member(critics, j, p), pr.state_net, pol, batch, lp);
             if (g) *g = l.critic_grads[j];
             return l.critic_loss;
           }));
    record("IQL value", fd_error(pr.state_net, [&](const ParamVector& p, ParamVector* g) {
             const auto l = iql_losses(critics, p, pol, batch, lp);
             if (g) *g = l.value_grad;
             return l.value_loss;
           }));
    record("IQL policy", fd_error(pol.params, [&](const ParamVector& p, ParamVector* g) {
             const auto l = iql_losses(critics, pr.state_net, with_params(pol, p), batch, lp);
             if (g) *g = l.policy_grad;
             return l.policy_loss;
           }));

    record("TD3 critic", fd_error(critics.members[j], [&](const ParamVector& p, ParamVector* g) {
             const auto l = td3_losses(with_member(critics, j, p), pol, batch, lp, seed);
             if (g) *g = l.critic.grads[j];
             return l.critic.loss;
           }));
    record("TD3 policy", fd_error(pol.params, [&](const ParamVector& p, ParamVector* g) {
             const auto l = td3_losses(critics, with_params(pol, p), batch, lp, seed);
             if (g) *g = l.policy.grad;
             return l.policy.loss;
           }));

    // The TD3+BC normalizer and the AWR weights are stop-gradient constants, so
    // the reference loss freezes them at the base point.
    const auto qmin = min_q(critics.members);
    double mean_abs = 0.0;
    for (const auto& b : batch) mean_abs += std::abs(qmin(b.tr.s, mean_action(pol, b.tr.s), nullptr));
    mean_abs /= static_cast<double>(batch.size());
    record("TD3+BC policy", fd_error(pol.params, [&](const ParamVector& p, ParamVector* g) {
             const auto pp = with_params(pol, p);
             if (g) *g = td3bc_policy_loss(pp, qmin, batch, lp.td3bc_beta).grad;
             double l = 0.0;
             for (const auto& b : batch) {
               const auto a = mean_action(pp, b.tr.s);
               double bc = 0.0;
               for (std::size_t i = 0; i < a.size(); ++i) bc += (a[i] - b.tr.a[i]) * (a[i] - b.tr.a[i]);
               l += -qmin(b.tr.s, a, nullptr) / mean_abs + lp.td3bc_beta * bc;
             }
             return l / static_cast<double>(batch.size());
           }));

    const auto qmean = mean_q(critics.members);
    std::vector<double> w;
    {
      Rng r(seed);
      for (const auto& b : batch) {
        const auto smp = policy_sample(pol, policy_head(pol, b.tr.s), r);
        w.push_back(std::min(std::exp((qmean(b.tr.s, b.tr.a, nullptr) - qmean(b.tr.s, smp.action, nullptr)) /
                                      lp.awr_temperature),
                             lp.weight_clip));
      }
    }
    record("AWR policy", fd_error(pol.params, [&](const ParamVector& p, ParamVector* g) {
             const auto pp = with_params(pol, p);
             if (g) *g = awr_policy_loss(pp, qmean, batch, lp.awr_temperature, lp.weight_clip, seed).grad;
             double l = 0.0;
             for (std::size_t i = 0; i < batch.size(); ++i) {
               l -= w[i] * log_prob_at(pp, policy_head(pp, batch[i].tr.s), batch[i].tr.a);
             }
             return l / static_cast<double>(batch.size());
           }));

    std::vector<diffusion::DiffusionSample> dbatch(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) dbatch[i] = {batch[i].tr.s, batch[i].tr.a, batch[i].w};
    record("diffusion", fd_error(pr.score.params(), [&](const ParamVector& p, ParamVector* g) {
             diffusion::ScoreModel m(pr.score.schedule(), pr.score.state_dim(), pr.score.action_dim(),
                                     pr.score.embed_dim(), p);
             const auto l = diffusion::diffusion_loss(m, dbatch, seed);
             if (g) *g = l.grad;
             return l.loss;
           }));
  }

  bool ok = true;
  std::string failures;
  double overall = 0.0;
  for (const auto& [name, w] : worst) {
    overall = std::max(overall, w);
    if (w > kTol) {
      ok = false;
      failures += " " + name + "=" + fmt("%.2e", w);
    }
  }
  return {ok, std::to_string(worst.size()) + " gradients x " + std::to_string(kConfigs) +
                  " configurations, worst rel err " + fmt("%.2e", overall) +
                  (failures.empty() ? "" : ", over tolerance:" + failures)};
}

// ---------------------------------------------------------------- 3

Verdict maxent_identity() {
  const auto r = verify_maxent_identity([](double a) { return -(a - 0.5) * (a - 0.5); }, 1.0);
  return {r.gap <= 1e-6, "sup-norm gap " + fmt("%.3e", r.gap) + " (tolerance 1e-6)"};
}

// ---------------------------------------------------------------- 4

Eigen::MatrixXd to_eigen(const numkit::Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

Verdict newton_schulz() {
  Rng rng(44);
  double lo = 1e300, hi = -1e300;
  for (int trial = 0; trial < 100; ++trial) {
    numkit::Matrix g(16, 8);
    const double scale = std::exp(rng.uniform(-3.0, 3.0));
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = 0; j < 8; ++j) g(i, j) = scale * rng.normal();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(optim::newton_schulz_orthogonalize(g, 5)));
    lo = std::min(lo, svd.singularValues().minCoeff());
    hi = std::max(hi, svd.singularValues().maxCoeff());
  }
  // Fixed points: a padded identity and random orthonormal columns.
  numkit::Matrix eye(16, 8);
  for (std::size_t i = 0; i < 8; ++i) eye(i, i) = 1.0;
  Eigen::MatrixXd r(16, 8);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 8; ++j) r(i, j) = rng.normal();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(r).householderQ() * Eigen::MatrixXd::Identity(16, 8);
  numkit::Matrix orth(16, 8);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 8; ++j) orth(i, j) = q(static_cast<int>(i), static_cast<int>(j));
  double drift = 0.0;
  for (const auto* m : {&eye, &orth}) {
    drift = std::max(drift, (to_eigen(optim::newton_schulz_orthogonalize(*m, 5)) - to_eigen(*m)).cwiseAbs().maxCoeff());
  }
  return {lo >= 0.7 && hi <= 1.3 && drift <= 1e-2, "singular values in [" + fmt("%.4f", lo) + ", " +
                                                        fmt("%.4f", hi) + "], fixed-point drift " +
                                                        fmt("%.2e", drift)};
}

// ---------------------------------------------------------------- 5

diffusion::ScoreModel fit_1d(const std::function<double(Rng&)>& draw, std::size_t width, std::size_t steps,
                             std::size_t batch, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<diffusion::DiffusionSample> data(4096);
  for (auto& d : data) d = {{0.0}, {draw(rng)}, 1.0};
  auto model = diffusion::ScoreModel::create(diffusion::cosine_schedule(32), 1, 1, {width, width},
                                             numkit::Activation::tanh, 12, rng);
  // Step the learning rate down twice; the k = 1 output is a small signal on
  // unit-variance targets and needs the averaging.
  double lr = 1e-3;
  for (std::uint64_t phase = 0; phase < 3; ++phase, lr /= 10) {
    diffusion::TrainOptions o;
    o.steps = steps;
    o.batch_size = batch;
    o.learning_rate = lr;
    o.seed = derive_seed(seed, phase);
    diffusion::train_score_model(model, data, o);
  }
  return model;
}

double score_of(const diffusion::ScoreModel& m, double a) {
  const double s[1] = {0.0};
  const double x[1] = {a};
  return diffusion::calibrated_score(m, s, x, 1.0)[0];
}

Verdict score_recovery() {
  const double sigma = 0.2;
  const auto gauss = fit_1d([&](Rng& r) { return sigma * r.normal(); }, 64, 2000, 1024, 7);
  double se = 0.0;
  int n = 0;
  for (int i = -50; i <= 50; ++i, ++n) {
    const double a = 2.0 * sigma * i / 50.0;
    const double d = score_of(gauss, a) - (0.0 - a) / (sigma * sigma);
    se += d * d;
  }
  const double rmse = std::sqrt(se / n);

  // Equal mixture of N(-0.5, 0.1^2) and N(0.5, 0.1^2).
  const auto mix = fit_1d([](Rng& r) { return (r.uniform() < 0.5 ? -0.5 : 0.5) + 0.1 * r.normal(); }, 64, 2000, 1024, 8);
  auto mixture_score = [](double a) {
    const double l = std::exp(-0.5 * std::pow((a + 0.5) / 0.1, 2)), h = std::exp(-0.5 * std::pow((a - 0.5) / 0.1, 2));
    return (l * (-0.5 - a) + h * (0.5 - a)) / (0.01 * (l + h));
  };
  bool signs = true;
  for (double a : {-0.7, -0.3, 0.3, 0.7}) signs = signs && (score_of(mix, a) > 0) == (mixture_score(a) > 0);
  const bool flips = score_of(mix, -0.3) < 0 && score_of(mix, 0.3) > 0;
  return {rmse <= 0.1 / sigma && signs && flips,
          "gaussian RMSE " + fmt("%.3f", rmse) + " (bound " + fmt("%.2f", 0.1 / sigma) + "), mixture score at -0.3/+0.3 " +
              fmt("%.2f", score_of(mix, -0.3)) + "/" + fmt("%+.2f", score_of(mix, 0.3)) +
              (signs ? ", signs match closed form" : ", signs DIFFER from closed form")};
}

// ---------------------------------------------------------------- 6, 7

Verdict penalty_ordering() {
  Rng rng(66);
  int violations = 0;
  double gap = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto pr = random_problem(rng);
    for (auto& b : pr.batch) b.mc = rng.normal(0.0, 1.5);
    const auto seed = rng.next_u64();
    const double cal = calql_penalty(pr.critics, pr.policy, pr.batch, seed).loss;
    const double cql = cql_penalty(pr.critics, pr.policy, pr.batch, seed).loss;
    if (!(cal <= cql)) ++violations;
    gap += (cql - cal) / 1000.0;
  }
  return {violations == 0,
          std::to_string(violations) + " violations in 1000 batches, mean cql - calql " + fmt("%.4f", gap)};
}

Verdict expectile_reduction() {
  Rng rng(77);
  double worst = 0.0;
  LossParams lp;
  lp.expectile = 0.5;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pr = random_problem(rng);
    double mse = 0.0;
    for (const auto& b : pr.batch) {
      const double u = min_q_value(pr.critics.targets, b.tr.s, b.tr.a) - state_net_value(pr.state_net, b.tr.s);
      mse += u * u;
    }
    mse /= static_cast<double>(pr.batch.size());
    worst = std::max(worst, std::abs(iql_losses(pr.critics, pr.state_net, pr.policy, pr.batch, lp).value_loss - 0.5 * mse));
  }
  return {worst <= 1e-12, "max |L_V - 0.5 MSE| " + fmt("%.2e", worst) + " over 1000 batches"};
}

// ---------------------------------------------------------------- 8

Verdict reduction_identity() {
  const std::vector<std::string> common{"optimizer=adam", "loss.kappa=0", "network.critic_hidden=[32,32]",
                                        "network.policy_hidden=[32,32]", "dataset.episodes=20"};
  auto with = [&](const char* alg) {
    auto o = common;
    o.push_back(alg);
    return pipeline::load_config("", o);
  };
  const auto smac = with("offline_alg=smac");
  const auto sac = with("offline_alg=sac");
  const auto data = pipeline::make_dataset(sac);
  auto a = pipeline::make_agent(smac, 5);
  auto b = pipeline::make_agent(sac, 5);
  std::size_t first_diff = 0;
  for (std::uint64_t step = 1; step <= 1000 && first_diff == 0; ++step) {
    pipeline::offline_train(a, smac, data, nullptr, 5, step);
    pipeline::offline_train(b, sac, data, nullptr, 5, step);
    if (pipeline::serialize_checkpoint(a) != pipeline::serialize_checkpoint(b)) first_diff = step;
  }
  return {first_diff == 0, first_diff == 0 ? "checkpoints byte-identical at each of 1000 steps"
                                           : "checkpoints diverge at step " + std::to_string(first_diff)};
}

// ---------------------------------------------------------------- 9

Verdict landscape_checks() {
  const auto c = pipeline::load_config("", {"network.policy_hidden=[16,16]"});
  const auto env = c.env_spec();
  const auto p0 = pipeline::make_agent(c, 1).policy;
  auto p1 = pipeline::make_agent(c, 2).policy;
  bool exact = true;
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    const auto curve = analysis::interpolate_eval(p0, p1, {0.0, 0.4, 1.0}, env, 5, seed);
    const auto e0 = pipeline::evaluate_policy(p0, env, 5, seed);
    const auto e1 = pipeline::evaluate_policy(p1, env, 5, seed);
    exact = exact && curve[0].mean == e0.mean && curve[0].std_error == e0.std_error && curve[2].mean == e1.mean &&
            curve[2].std_error == e1.std_error;
  }
  Rng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + rng.uniform_index(2000);
    const numkit::MlpSpec spec{{n, 1}, numkit::Activation::tanh, numkit::OutputTransform::identity};
    std::vector<ParamVector> th(3, ParamVector(spec));
    const double scale = std::exp(rng.uniform(-4.0, 4.0));
    for (auto& t : th)
      for (double& v : t.values()) v = scale * rng.normal();
    // Some triples are nearly collinear to stress the projection.
    if (trial % 4 == 0) th[2] = 2.0 * th[1] - th[0] + (1e-2 * scale) * th[2];
    const auto basis = analysis::plane_basis(th[0], th[1], th[2]);
    const double cosine = numkit::dot(basis.u, basis.v) / (numkit::norm(basis.u) * numkit::norm(basis.v));
    worst = std::max(worst, std::abs(cosine));
  }
  return {exact && worst <= 1e-10, std::string(exact ? "endpoints exact" : "endpoints DIFFER") +
                                       ", max |cos(u, v)| " + fmt("%.2e", worst) + " over 100 triples"};
}

// ---------------------------------------------------------------- 10

Verdict desk_transfer() {
  const auto c = pipeline::load_config((fs::path(O2O_SOURCE_DIR) / "configs" / "reach2d_desk.json").string());
  const auto data = pipeline::make_dataset(c);
  const auto env = c.env_spec();
  // Behaviour policy evaluated on the same reset seeds as the agents.
  const auto beh = envs::noisy_expert(env, c.dataset.noise_std);
  double behaviour = 0.0;
  constexpr int kBehaviourEpisodes = 100;
  for (int e = 0; e < kBehaviourEpisodes; ++e) {
    Rng r(derive_seed(1234, static_cast<std::uint64_t>(e)));
    behaviour += envs::rollout(env, beh, derive_seed(derive_seed(0, pipeline::kEvalSeedTag), e), r).undiscounted_return;
  }
  behaviour /= kBehaviourEpisodes;

  bool ok = c.seeds.size() >= 4;
  std::string detail = "behaviour J " + fmt("%.3f", behaviour) + ";";
  for (auto seed : c.seeds) {
    const auto score = pipeline::train_diffusion(c, data, seed);
    const auto ck = pipeline::offline_pretrain(c, data, &score, seed);
    const auto on = pipeline::online_finetune(ck, c, data, seed);
    const double j0 = on.eval_returns.at(0), j1 = on.eval_returns.at(1), fin = on.eval_returns.back();
    const bool stable = j1 >= 0.9 * j0;
    const bool beats = fin > behaviour;
    ok = ok && stable && beats;
    detail += " seed " + std::to_string(seed) + ": J0 " + fmt("%.2f", j0) + " J1 " + fmt("%.2f", j1) + " final " +
              fmt("%.2f", fin) + (stable ? "" : " UNSTABLE") + (beats ? "" : " BELOW-BEHAVIOUR") + ";";
    std::fflush(stdout);
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- 11

Verdict cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "o2o_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "tiny.json") << R"({
    "network": {"critic_hidden": [8, 8], "policy_hidden": [8], "alpha_hidden": [4], "value_hidden": [8]},
    "dataset": {"episodes": 6},
    "diffusion": {"hidden": [16], "train_steps": 30, "batch": 32, "steps": 8},
    "offline_batch": 16, "online_batch": 16, "offline_steps": 20, "online_steps": 20,
    "warm_start_count": 40, "eval_every": 5, "eval_episodes": 2, "seeds": [1, 2]})";
  const std::string cfg = (root / "tiny.json").string();
  auto at = [&](const std::string& rel) { return (root / rel).string(); };

  std::string failures;
  std::size_t compared = 0;
  // Runs a command twice into <name>_a and <name>_b and compares every CSV.
  auto twice = [&](const std::string& name, std::vector<std::string> args) {
    for (const char* suffix : {"_a", "_b"}) {
      auto full = args;
      full.insert(full.begin(), "o2olab");
      full.push_back("--out");
      full.push_back(at(name + suffix));
      std::vector<const char*> argv;
      for (const auto& s : full) argv.push_back(s.c_str());
      std::ostringstream out, err;
      if (cli::run(static_cast<int>(argv.size()), argv.data(), out, err) != 0) {
        failures += " " + name + " failed(" + err.str() + ")";
        return;
      }
    }
    for (const auto& e : fs::recursive_directory_iterator(at(name + "_a"))) {
      if (e.path().extension() != ".csv") continue;
      const auto rel = fs::relative(e.path(), at(name + "_a"));
      ++compared;
      if (slurp(e.path()) != slurp(fs::path(at(name + "_b")) / rel)) failures += " " + name + "/" + rel.string();
    }
  };
  twice("gen", {"gen-data", "--config", cfg});
  const std::string data = at("gen_a/dataset.jsonl");
  twice("diff", {"train-diffusion", "--config", cfg, "--data", data});
  twice("pre", {"pretrain", "--config", cfg, "--data", data, "--jobs", "2"});
  twice("fine", {"finetune", "--config", cfg, "--data", data, "--checkpoint", at("pre_a")});
  const std::string off = at("pre_a/seed_1/checkpoint.bin"), on = at("fine_a/seed_1/checkpoint.bin");
  twice("line", {"landscape-line", "--config", cfg, "--offline", off, "--online", on, "--points", "5"});
  twice("plane", {"landscape-plane", "--config", cfg, "--theta", off, "--theta", on, "--theta",
                  at("fine_a/seed_2/checkpoint.bin"), "--resolution", "4", "--jobs", "2"});
  twice("export", {"export-checkpoints", "--checkpoint", off, "--checkpoint", on});
  twice("regret", {"regret-table", "--input", at("fine_a")});
  twice("table", {"regret-table", "--input", std::string(O2O_SOURCE_DIR) + "/data"});
  twice("verify", {"verify-identity"});
  fs::remove_all(root);
  return {failures.empty() && compared > 0,
          std::to_string(compared) + " CSV files compared across 9 commands (10 runs)" +
              (failures.empty() ? ", all byte-identical" : ", mismatched:" + failures)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Verdict (*run)();
  };
  const Criterion all[] = {
      {1, "aggregate regret table", aggregate_table},
      {2, "gradient suite", gradient_suite},
      {3, "max-entropy identity", maxent_identity},
      {4, "newton-schulz orthogonalization", newton_schulz},
      {5, "score recovery", score_recovery},
      {6, "calql <= cql penalty", penalty_ordering},
      {7, "expectile reduction", expectile_reduction},
      {8, "smac(kappa=0) == sac", reduction_identity},
      {9, "landscape endpoints and basis", landscape_checks},
      {10, "desk-scale transfer", desk_transfer},
      {11, "cli determinism", cli_determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s  %s: %s (%.1fs)\n", c.id, v.pass ? "PASS" : "FAIL", c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
