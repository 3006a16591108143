#include "o2o/cli/cli.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "o2o/agents/maxent.hpp"
#include "o2o/analysis/landscape.hpp"
#include "o2o/analysis/regret_table.hpp"
#include "o2o/error.hpp"
#include "o2o/pipeline/training.hpp"

namespace o2o::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using pipeline::AgentCheckpoint;
using pipeline::ExperimentConfig;
using pipeline::MetricsLog;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("cannot write '" + p.string() + "'");
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t jobs = 1;
  bool force = false;
};

/// Output directory staged next to its final location and renamed into place on
/// commit; abandoned stages are removed, so a failed command leaves nothing behind.
class Artifacts {
 public:
  Artifacts(fs::path final_dir, bool force) : final_(std::move(final_dir)), force_(force) {
    if (final_.has_parent_path()) fs::create_directories(final_.parent_path());
    stage_ = final_;
    stage_ += ".partial-" + std::to_string(::getpid());
    fs::remove_all(stage_);
    fs::create_directories(stage_);
  }
  Artifacts(const Artifacts&) = delete;
  Artifacts& operator=(const Artifacts&) = delete;
  ~Artifacts() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(stage_, ec);
    }
  }

  fs::path path(const std::string& rel) const {
    const auto p = stage_ / rel;
    fs::create_directories(p.parent_path());
    return p;
  }
  void write(const std::string& rel, const std::string& bytes) {
    write_file(path(rel), bytes);
    hashes_[rel] = hex64(fnv1a64(bytes));
  }
  /// Records a file that a library routine wrote at path(rel).
  void adopt(const std::string& rel) { hashes_[rel] = hex64(fnv1a64(read_file(stage_ / rel))); }

  void commit(json manifest) {
    manifest["artifacts"] = hashes_;
    write_file(stage_ / "manifest.json", manifest.dump(2) + "\n");
    if (fs::is_directory(final_) && fs::is_empty(final_)) fs::remove(final_);
    if (fs::exists(final_)) {
      if (!force_) throw ConfigError("output directory '" + final_.string() + "' appeared while running");
      fs::remove_all(final_);
    }
    fs::rename(stage_, final_);
    committed_ = true;
  }

  const fs::path& final_dir() const { return final_; }

 private:
  fs::path final_;
  fs::path stage_;
  bool force_;
  bool committed_ = false;
  std::map<std::string, std::string> hashes_;
};

/// Checks the destination before any work is done.
fs::path resolve_out(const Common& c, const std::string& command, const json& identity) {
  fs::path out;
  if (!c.out.empty()) {
    out = c.out;
  } else {
    const char* root = std::getenv("O2OLAB_OUT");
    out = fs::path(root && *root ? root : "runs") / (command + "-" + hex64(fnv1a64(identity.dump())).substr(0, 12));
  }
  if (fs::exists(out) && !c.force) {
    if (!fs::is_directory(out) || !fs::is_empty(out)) {
      throw ConfigError("output directory '" + out.string() + "' exists and is not empty (use --force to replace it)");
    }
  }
  return out;
}

ExperimentConfig load(const Common& c) { return pipeline::load_config(c.config_path, c.overrides); }

std::vector<std::uint64_t> seeds_of(const Common& c, const ExperimentConfig& cfg) {
  if (c.seed_given) return {c.seed};
  return cfg.seeds;
}

json input_entry(const std::string& path) { return {{"path", path}, {"fnv1a64", hex64(fnv1a64(read_file(path)))}}; }

json base_manifest(const std::string& command, const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  return {{"tool", "o2olab"}, {"format", 1}, {"command", command}, {"config", pipeline::to_json(cfg)}, {"seeds", seeds}};
}

envs::Dataset dataset_for(const std::string& path, const ExperimentConfig& cfg) {
  if (path.empty()) return pipeline::make_dataset(cfg);
  if (!fs::exists(path)) throw ConfigError("dataset '" + path + "' does not exist");
  auto data = envs::load_dataset(path);
  if (data.env().name != cfg.env) {
    throw ConfigError("dataset is for env '" + data.env().name + "' but the config says '" + cfg.env + "'");
  }
  return data;
}

AgentCheckpoint load_ckpt(const std::string& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("checkpoint '" + path + "' does not exist");
  return pipeline::load_checkpoint(path);
}

/// Runs fn(i) for every index, on up to `jobs` threads. Errors are rethrown in
/// index order after every worker has finished.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t k = std::max<std::size_t>(1, std::min(jobs, n));
  if (k == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < k; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string seed_dir(std::uint64_t s) { return "seed_" + std::to_string(s); }

bool needs_score(const ExperimentConfig& cfg) {
  return cfg.offline_alg == pipeline::OfflineAlg::smac && cfg.loss.kappa > 0.0;
}

// ---------------------------------------------------------------- commands

int cmd_gen_data(const Common& c, std::ostream& out) {
  auto cfg = load(c);
  if (c.seed_given) cfg.dataset.seed = c.seed;
  auto manifest = base_manifest("gen-data", cfg, {cfg.dataset.seed});
  Artifacts art(resolve_out(c, "gen-data", manifest), c.force);
  const auto data = pipeline::make_dataset(cfg);
  envs::save_dataset(data, art.path("dataset.jsonl"));
  art.adopt("dataset.jsonl");
  art.commit(manifest);
  out << "gen-data: " << data.num_transitions() << " transitions in " << data.trajectories().size()
      << " trajectories -> " << art.final_dir().string() << "\n";
  return kExitOk;
}

int cmd_train_diffusion(const Common& c, const std::string& data_path, std::ostream& out) {
  const auto cfg = load(c);
  const auto seed = seeds_of(c, cfg).front();
  auto manifest = base_manifest("train-diffusion", cfg, {seed});
  if (!data_path.empty()) manifest["inputs"]["data"] = input_entry(data_path);
  const auto data = dataset_for(data_path, cfg);
  Artifacts art(resolve_out(c, "train-diffusion", manifest), c.force);
  MetricsLog log;
  const auto model = pipeline::train_diffusion(cfg, data, seed, {&log, "seed" + std::to_string(seed)});
  art.write("score_model.bin", diffusion::serialize_score_model(model));
  art.write("metrics.csv", log.to_csv());
  art.commit(manifest);
  out << "train-diffusion: seed " << seed << " -> " << art.final_dir().string() << "\n";
  return kExitOk;
}

int cmd_pretrain(const Common& c, const std::string& data_path, const std::string& score_path, std::ostream& out) {
  const auto cfg = load(c);
  const auto seeds = seeds_of(c, cfg);
  auto manifest = base_manifest("pretrain", cfg, seeds);
  if (!data_path.empty()) manifest["inputs"]["data"] = input_entry(data_path);
  if (!score_path.empty()) manifest["inputs"]["score"] = input_entry(score_path);
  const auto data = dataset_for(data_path, cfg);
  std::optional<diffusion::ScoreModel> shared_score;
  if (!score_path.empty()) shared_score = diffusion::load_score_model(score_path);
  Artifacts art(resolve_out(c, "pretrain", manifest), c.force);

  struct Result {
    AgentCheckpoint ckpt;
    MetricsLog log;
    std::optional<diffusion::ScoreModel> score;
  };
  std::vector<Result> res(seeds.size());
  parallel_for(seeds.size(), c.jobs, [&](std::size_t i) {
    const std::string run = "seed" + std::to_string(seeds[i]);
    const diffusion::ScoreModel* score = shared_score ? &*shared_score : nullptr;
    if (!score && needs_score(cfg)) {
      res[i].score = pipeline::train_diffusion(cfg, data, seeds[i], {&res[i].log, run});
      score = &*res[i].score;
    }
    res[i].ckpt = pipeline::offline_pretrain(cfg, data, score, seeds[i], {&res[i].log, run});
  });

  MetricsLog all;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto dir = seed_dir(seeds[i]);
    art.write(dir + "/checkpoint.bin", pipeline::serialize_checkpoint(res[i].ckpt));
    if (res[i].score) art.write(dir + "/score_model.bin", diffusion::serialize_score_model(*res[i].score));
    art.write(dir + "/metrics.csv", res[i].log.to_csv());
    all.append(res[i].log);
    const auto evals = res[i].log.select("eval_return", "offline");
    out << "pretrain " << pipeline::to_string(cfg.offline_alg) << " seed " << seeds[i] << ": final eval "
        << (evals.empty() ? std::string("n/a") : pipeline::format_real(evals.back().value)) << "\n";
  }
  art.write("metrics.csv", all.to_csv());
  art.commit(manifest);
  out << "-> " << art.final_dir().string() << "\n";
  return kExitOk;
}

int cmd_finetune(const Common& c, const std::string& data_path, const std::string& ckpt_path, std::ostream& out) {
  const auto cfg = load(c);
  const auto seeds = seeds_of(c, cfg);
  auto manifest = base_manifest("finetune", cfg, seeds);
  if (!data_path.empty()) manifest["inputs"]["data"] = input_entry(data_path);
  std::vector<AgentCheckpoint> start;
  for (auto s : seeds) {
    const std::string p = fs::is_directory(ckpt_path) ? (fs::path(ckpt_path) / seed_dir(s) / "checkpoint.bin").string()
                                                      : ckpt_path;
    manifest["inputs"]["checkpoint_" + std::to_string(s)] = input_entry(p);
    start.push_back(load_ckpt(p));
  }
  const auto data = dataset_for(data_path, cfg);
  Artifacts art(resolve_out(c, "finetune", manifest), c.force);

  std::vector<pipeline::OnlineResult> res(seeds.size());
  std::vector<MetricsLog> logs(seeds.size());
  parallel_for(seeds.size(), c.jobs, [&](std::size_t i) {
    res[i] = pipeline::online_finetune(start[i], cfg, data, seeds[i], {&logs[i], "seed" + std::to_string(seeds[i])});
  });

  MetricsLog all;
  std::string summary = "seed,j0,j1,stable_transfer,final\n";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto dir = seed_dir(seeds[i]);
    const auto& r = res[i];
    art.write(dir + "/checkpoint.bin", pipeline::serialize_checkpoint(r.checkpoint));
    art.write(dir + "/metrics.csv", logs[i].to_csv());
    all.append(logs[i]);
    const double j1 = r.eval_returns.size() > 1 ? r.eval_returns[1] : std::nan("");
    summary += std::to_string(seeds[i]) + "," + pipeline::format_real(r.eval_returns.front()) + "," +
               pipeline::format_real(j1) + "," + pipeline::format_real(r.stable_transfer) + "," +
               pipeline::format_real(r.eval_returns.back()) + "\n";
    out << "finetune " << pipeline::to_string(cfg.online_alg) << " seed " << seeds[i]
        << ": J0 " << pipeline::format_real(r.eval_returns.front()) << ", stable transfer "
        << pipeline::format_real(r.stable_transfer) << ", final " << pipeline::format_real(r.eval_returns.back())
        << "\n";
  }
  art.write("metrics.csv", all.to_csv());
  art.write("summary.csv", summary);
  art.commit(manifest);
  out << "-> " << art.final_dir().string() << "\n";
  return kExitOk;
}

int cmd_landscape_line(const Common& c, const std::string& off_path, const std::string& on_path, std::size_t points,
                       double t_min, double t_max, std::ostream& out) {
  const auto cfg = load(c);
  if (points < 2) throw ConfigError("--points must be at least 2");
  if (!(t_min < t_max)) throw ConfigError("--t-min must be below --t-max");
  const auto seed = seeds_of(c, cfg).front();
  auto manifest = base_manifest("landscape-line", cfg, {seed});
  manifest["inputs"]["offline"] = input_entry(off_path);
  manifest["inputs"]["online"] = input_entry(on_path);
  manifest["options"] = {{"points", points}, {"t_min", t_min}, {"t_max", t_max}};
  const auto a = load_ckpt(off_path), b = load_ckpt(on_path);
  Artifacts art(resolve_out(c, "landscape-line", manifest), c.force);
  std::vector<double> ts;
  for (std::size_t i = 0; i < points; ++i) {
    ts.push_back(i == 0 ? t_min : i + 1 == points ? t_max
                                                  : t_min + (t_max - t_min) * static_cast<double>(i) /
                                                                static_cast<double>(points - 1));
  }
  const auto curve = analysis::interpolate_eval(a.policy, b.policy, ts, cfg.env_spec(), cfg.eval_episodes,
                                                derive_seed(seed, pipeline::kEvalSeedTag));
  art.write("curve.csv", analysis::curve_to_csv(curve));
  art.commit(manifest);
  out << "landscape-line: " << points << " points -> " << art.final_dir().string() << "\n";
  return kExitOk;
}

int cmd_landscape_plane(const Common& c, const std::vector<std::string>& thetas, const analysis::GridOptions& grid,
                        std::ostream& out) {
  const auto cfg = load(c);
  if (thetas.size() != 3) throw ConfigError("landscape-plane needs exactly three --theta checkpoints");
  const auto seed = seeds_of(c, cfg).front();
  auto manifest = base_manifest("landscape-plane", cfg, {seed});
  for (std::size_t i = 0; i < 3; ++i) manifest["inputs"]["theta" + std::to_string(i + 1)] = input_entry(thetas[i]);
  manifest["options"] = {{"low", grid.low}, {"high", grid.high}, {"resolution", grid.resolution}};
  std::vector<AgentCheckpoint> ck;
  for (const auto& p : thetas) ck.push_back(load_ckpt(p));
  const auto basis = analysis::plane_basis(ck[0].policy.params, ck[1].policy.params, ck[2].policy.params);
  if (grid.resolution < 2) throw ConfigError("--resolution must be at least 2");
  Artifacts art(resolve_out(c, "landscape-plane", manifest), c.force);
  auto opt = grid;
  opt.jobs = c.jobs;
  const auto g = analysis::plane_grid_eval(basis, ck[0].policy, cfg.env_spec(), cfg.eval_episodes,
                                           derive_seed(seed, pipeline::kEvalSeedTag), opt);
  art.write("grid.csv", analysis::grid_to_csv(g));
  const json b = {{"u_norm", basis.u_norm}, {"v_norm", basis.v_norm}, {"input_cosine", basis.input_cosine}};
  art.write("basis.json", b.dump(2) + "\n");
  art.commit(manifest);
  out << "landscape-plane: " << grid.resolution << "x" << grid.resolution << " grid -> " << art.final_dir().string()
      << "\n";
  return kExitOk;
}

int cmd_export(const Common& c, const std::vector<std::string>& paths, std::ostream& out) {
  const auto cfg = load(c);
  if (paths.empty()) throw ConfigError("export-checkpoints needs at least one --checkpoint");
  auto manifest = base_manifest("export-checkpoints", cfg, {});
  std::vector<numkit::ParamVector> params;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    manifest["inputs"]["checkpoint_" + std::to_string(i)] = input_entry(paths[i]);
    params.push_back(load_ckpt(paths[i]).policy.params);
  }
  const auto text = analysis::export_checkpoint_matrix(params);
  Artifacts art(resolve_out(c, "export-checkpoints", manifest), c.force);
  art.write("checkpoints.csv", text);
  art.commit(manifest);
  out << "export-checkpoints: " << params.size() << " rows of " << params[0].size() << " -> "
      << art.final_dir().string() << "\n";
  return kExitOk;
}

/// Regret records of one finetune output directory (one cell, one stream per seed).
pipeline::RegretRecord record_from_run(const fs::path& dir) {
  const auto m = json::parse(read_file(dir / "manifest.json"));
  const auto cfg = pipeline::config_from_json(m.at("config"));
  std::vector<std::vector<double>> rewards;
  for (const auto& s : m.at("seeds")) {
    const auto log = MetricsLog::parse_csv(read_file(dir / seed_dir(s.get<std::uint64_t>()) / "metrics.csv"));
    std::vector<double> r;
    for (const auto& row : log.select("eval_return", "online"))
      if (row.step > 0) r.push_back(row.value);
    if (r.empty()) throw ConfigError("run '" + dir.string() + "' has no online evaluations after step 0");
    rewards.push_back(std::move(r));
  }
  return pipeline::make_regret_record(cfg.env, pipeline::to_string(cfg.offline_alg),
                                      pipeline::to_string(cfg.online_alg), std::move(rewards), 0.0);
}

int cmd_regret_table(const Common& c, const std::vector<std::string>& inputs, std::ostream& out) {
  if (inputs.empty()) throw ConfigError("regret-table needs --input");
  static const std::string header = "env,offline_alg,online_alg,mean_regret,stderr_regret";
  json manifest = {{"tool", "o2olab"}, {"format", 1}, {"command", "regret-table"}};
  std::vector<pipeline::RegretRecord> tables, runs;
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (!fs::exists(in)) throw ConfigError("input '" + in + "' does not exist");
    if (fs::is_directory(in)) {
      for (const auto& e : fs::recursive_directory_iterator(in)) files.push_back(e.path());
    } else {
      files.push_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    if (f.filename() == "manifest.json") {
      const auto m = json::parse(read_file(f), nullptr, false);
      if (!m.is_discarded() && m.value("command", "") == "finetune") {
        runs.push_back(record_from_run(f.parent_path()));
        manifest["inputs"][f.parent_path().string()] = input_entry(f.string());
      }
    } else if (f.extension() == ".csv" && fs::is_regular_file(f)) {
      const auto text = read_file(f);
      if (text.compare(0, header.size(), header) == 0) {
        for (auto& r : analysis::parse_regret_csv(text)) tables.push_back(std::move(r));
        manifest["inputs"][f.string()] = input_entry(f.string());
      }
    }
  }
  // Runs share R*: the best evaluation observed in their environment.
  std::map<std::string, std::vector<pipeline::RegretRecord>> by_env;
  for (auto& r : runs) by_env[r.env].push_back(std::move(r));
  auto records = tables;
  for (auto& [env, rs] : by_env) {
    const double r_star = pipeline::best_reward(rs);
    for (auto& r : rs) {
      records.push_back(pipeline::make_regret_record(r.env, r.offline_alg, r.online_alg, r.rewards, r_star));
    }
  }
  if (records.empty()) throw ConfigError("no regret tables or finetune runs found under the inputs");
  const auto table = analysis::aggregate_normalized_regret(records);
  Artifacts art(resolve_out(c, "regret-table", manifest), c.force);
  art.write("records.csv", analysis::regret_records_to_csv(records));
  art.write("cells.csv", analysis::cells_to_csv(table));
  art.write("table.csv", analysis::aggregate_to_csv(table));
  art.commit(manifest);
  out << analysis::aggregate_to_csv(table) << "-> " << art.final_dir().string() << "\n";
  return kExitOk;
}

int cmd_verify_identity(const Common& c, double alpha, std::size_t points, double tolerance, std::ostream& out) {
  // Bundled quadratic critic; its max-entropy policy is N(0.5, alpha / 2).
  const auto q = [](double a) { return -(a - 0.5) * (a - 0.5); };
  agents::Grid1D grid;
  grid.points = points;
  json manifest = {{"tool", "o2olab"},
                   {"format", 1},
                   {"command", "verify-identity"},
                   {"options", {{"alpha", alpha}, {"points", points}, {"tolerance", tolerance}}}};
  if (!(alpha > 0.0)) throw ConfigError("--alpha must be positive");
  if (points < 3) throw ConfigError("--points must be at least 3");
  const auto r = agents::verify_maxent_identity(q, alpha, grid);
  Artifacts art(resolve_out(c, "verify-identity", manifest), c.force);
  std::string csv = "a,log_density\n";
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    csv += pipeline::format_real(r.grid[i]) + "," + pipeline::format_real(r.log_density[i]) + "\n";
  }
  art.write("identity.csv", csv);
  art.write("gap.txt", pipeline::format_real(r.gap) + "\n");
  art.commit(manifest);
  char line[160];
  std::snprintf(line, sizeof line, "sup-norm gap %.3e (tolerance %.1e): %s\n", r.gap, tolerance,
                r.gap <= tolerance ? "ok" : "FAILED");
  out << line;
  return r.gap <= tolerance ? kExitOk : kExitNumeric;
}

void add_common(CLI::App* sc, Common& c, bool with_config = true) {
  if (with_config) {
    sc->add_option("--config", c.config_path, "JSON config (defaults when omitted)");
    sc->add_option("--override", c.overrides, "dotted.key=value, repeatable; last wins")
        ->allow_extra_args(false)
        ->take_all();
    sc->add_option("--seed", c.seed, "single seed instead of the config's seed list")->each([&c](const std::string&) {
      c.seed_given = true;
    });
    sc->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  }
  sc->add_option("--out", c.out, "output directory (default $O2OLAB_OUT or ./runs, then <command>-<hash>)");
  sc->add_flag("--force", c.force, "replace an existing output directory");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"o2olab: offline-to-online RL laboratory", "o2olab"};
  app.require_subcommand(1);
  Common c;
  std::string data_path, score_path, ckpt_path, off_path, on_path;
  std::vector<std::string> thetas, ckpts, inputs;
  std::size_t points = 21, id_points = 2001;
  double t_min = 0.0, t_max = 1.0, alpha = 1.0, tolerance = 1e-6;
  analysis::GridOptions grid;

  auto* gen = app.add_subcommand("gen-data", "generate the noisy-expert dataset");
  add_common(gen, c);
  auto* dif = app.add_subcommand("train-diffusion", "train the action score model");
  add_common(dif, c);
  dif->add_option("--data", data_path, "dataset.jsonl (generated from the config when omitted)");
  auto* pre = app.add_subcommand("pretrain", "offline pre-training, one run per seed");
  add_common(pre, c);
  pre->add_option("--data", data_path, "dataset.jsonl");
  pre->add_option("--score", score_path, "trained score model (trained per seed when omitted and needed)");
  auto* fin = app.add_subcommand("finetune", "online fine-tuning from pre-trained checkpoints");
  add_common(fin, c);
  fin->add_option("--data", data_path, "dataset.jsonl");
  fin->add_option("--checkpoint", ckpt_path, "checkpoint file, or a pretrain output directory")->required();
  auto* line = app.add_subcommand("landscape-line", "evaluate the actor along the offline-online segment");
  add_common(line, c);
  line->add_option("--offline", off_path, "checkpoint at t = 0")->required();
  line->add_option("--online", on_path, "checkpoint at t = 1")->required();
  line->add_option("--points", points, "number of t values");
  line->add_option("--t-min", t_min);
  line->add_option("--t-max", t_max);
  auto* plane = app.add_subcommand("landscape-plane", "evaluate the actor on the plane through three checkpoints");
  add_common(plane, c);
  plane->add_option("--theta", thetas, "three checkpoints: origin, u end, v end")->allow_extra_args(false)->take_all();
  plane->add_option("--resolution", grid.resolution, "grid points per axis");
  plane->add_option("--low", grid.low);
  plane->add_option("--high", grid.high);
  auto* reg = app.add_subcommand("regret-table", "normalized regret table from regret CSVs and finetune runs");
  add_common(reg, c, false);
  reg->add_option("--input", inputs, "files or directories, repeatable")->allow_extra_args(false)->take_all();
  auto* ver = app.add_subcommand("verify-identity", "max-entropy identity check by quadrature");
  add_common(ver, c, false);
  ver->add_option("--alpha", alpha, "temperature");
  ver->add_option("--points", id_points, "quadrature grid points on [-5, 5]");
  ver->add_option("--tolerance", tolerance);
  auto* exp = app.add_subcommand("export-checkpoints", "flattened actor parameters, one row per checkpoint");
  add_common(exp, c);
  exp->add_option("--checkpoint", ckpts, "checkpoint files, repeatable")->allow_extra_args(false)->take_all();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(c, out);
    if (dif->parsed()) return cmd_train_diffusion(c, data_path, out);
    if (pre->parsed()) return cmd_pretrain(c, data_path, score_path, out);
    if (fin->parsed()) return cmd_finetune(c, data_path, ckpt_path, out);
    if (line->parsed()) return cmd_landscape_line(c, off_path, on_path, points, t_min, t_max, out);
    if (plane->parsed()) return cmd_landscape_plane(c, thetas, grid, out);
    if (reg->parsed()) return cmd_regret_table(c, inputs, out);
    if (ver->parsed()) return cmd_verify_identity(c, alpha, id_points, tolerance, out);
    if (exp->parsed()) return cmd_export(c, ckpts, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace o2o::cli
