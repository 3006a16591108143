#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "o2o/cli/cli.hpp"
#include "o2o/envs/dataset.hpp"
#include "o2o/pipeline/agent.hpp"

namespace fs = std::filesystem;
using namespace o2o;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "o2olab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("o2o_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream(root_ / "tiny.json") << R"({
      "network": {"critic_hidden": [8, 8], "policy_hidden": [8], "alpha_hidden": [4], "value_hidden": [8]},
      "dataset": {"episodes": 6},
      "diffusion": {"hidden": [16], "train_steps": 30, "batch": 32, "steps": 8},
      "offline_batch": 16, "online_batch": 16, "offline_steps": 12, "online_steps": 12,
      "warm_start_count": 40, "eval_every": 4, "eval_episodes": 2, "seeds": [3, 4]})";
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string p(const std::string& rel) const { return (root_ / rel).string(); }
  std::string cfg() const { return p("tiny.json"); }

  fs::path root_;
};

}  // namespace

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(cli::fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(cli::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(cli::fnv1a64("foobar"), 0x85944171f73967e8ull);
}

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_NE(run({"--help"}).out.find("landscape-plane"), std::string::npos);
  const auto bad = run({"pretrain", "--bogus"});
  EXPECT_EQ(bad.code, cli::kExitConfig);
  EXPECT_NE(bad.err.find("--override"), std::string::npos);  // usage text
  EXPECT_EQ(run({}).code, cli::kExitConfig);
  EXPECT_EQ(run({"train-everything"}).code, cli::kExitConfig);
  EXPECT_EQ(run({"finetune", "--out", p("x")}).code, cli::kExitConfig);  // --checkpoint is required
}

TEST_F(Cli, ConfigErrorsLeaveNoOutput) {
  EXPECT_EQ(run({"pretrain", "--config", cfg(), "--override", "loss.nope=1", "--out", p("a")}).code, cli::kExitConfig);
  EXPECT_EQ(run({"pretrain", "--config", p("missing.json"), "--out", p("b")}).code, cli::kExitConfig);
  EXPECT_EQ(run({"pretrain", "--config", cfg(), "--override", "mix=2", "--out", p("c")}).code, cli::kExitConfig);
  EXPECT_EQ(run({"finetune", "--config", cfg(), "--checkpoint", p("nothing.bin"), "--out", p("d")}).code,
            cli::kExitConfig);
  for (auto d : {"a", "b", "c", "d"}) EXPECT_FALSE(fs::exists(p(d))) << d;
  for (const auto& e : fs::directory_iterator(root_)) EXPECT_EQ(e.path().filename(), "tiny.json");
}

TEST_F(Cli, NumericAbortExitsThreeWithoutOutput) {
  const auto r = run({"pretrain", "--config", cfg(), "--override", "offline_alg=sac", "--override", "optimizer=adam",
                      "--override", "lr.critic=1e250", "--out", p("nan")});
  EXPECT_EQ(r.code, cli::kExitNumeric) << r.err;
  EXPECT_NE(r.err.find("critic_loss"), std::string::npos);
  EXPECT_FALSE(fs::exists(p("nan")));
  for (const auto& e : fs::directory_iterator(root_)) EXPECT_EQ(e.path().filename(), "tiny.json");
}

TEST_F(Cli, VerifyIdentity) {
  const auto r = run({"verify-identity", "--alpha", "1.0", "--out", p("vi")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find(": ok"), std::string::npos);
  EXPECT_LE(std::stod(slurp(p("vi/gap.txt"))), 1e-6);
  EXPECT_EQ(run({"verify-identity", "--alpha", "0", "--out", p("v0")}).code, cli::kExitConfig);
  EXPECT_EQ(run({"verify-identity", "--tolerance", "0", "--out", p("vt")}).code, cli::kExitNumeric);
}

TEST_F(Cli, RegretTableFromFixture) {
  const auto r = run({"regret-table", "--input", std::string(O2O_SOURCE_DIR) + "/data", "--out", p("rt")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto table = slurp(p("rt/table.csv"));
  EXPECT_NE(table.find("smac,sac,0.0312319879030"), std::string::npos) << table;
  EXPECT_NE(table.find("iql,sac,0.470937744933"), std::string::npos) << table;
  EXPECT_NE(table.find("td3bc,sac,0.96196069434"), std::string::npos) << table;
  EXPECT_EQ(run({"regret-table", "--input", p("nowhere"), "--out", p("rt2")}).code, cli::kExitConfig);
}

TEST_F(Cli, ExistingOutputNeedsForce) {
  fs::create_directories(p("busy"));
  std::ofstream(p("busy/file")) << "x";
  EXPECT_EQ(run({"verify-identity", "--out", p("busy")}).code, cli::kExitConfig);
  EXPECT_TRUE(fs::exists(p("busy/file")));
  EXPECT_EQ(run({"verify-identity", "--out", p("busy"), "--force"}).code, 0);
  EXPECT_FALSE(fs::exists(p("busy/file")));
  EXPECT_TRUE(fs::exists(p("busy/manifest.json")));
  fs::create_directories(p("empty"));
  EXPECT_EQ(run({"verify-identity", "--out", p("empty")}).code, 0);
}

TEST_F(Cli, OutputRootFromEnvironment) {
  ::setenv("O2OLAB_OUT", p("root").c_str(), 1);
  const auto r = run({"verify-identity"});
  ::unsetenv("O2OLAB_OUT");
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<fs::path> made;
  for (const auto& e : fs::directory_iterator(p("root"))) made.push_back(e.path());
  ASSERT_EQ(made.size(), 1u);
  EXPECT_EQ(made[0].filename().string().rfind("verify-identity-", 0), 0u);
}

TEST_F(Cli, ManifestHashesArtifacts) {
  ASSERT_EQ(run({"gen-data", "--config", cfg(), "--out", p("d")}).code, 0);
  const auto m = nlohmann::json::parse(slurp(p("d/manifest.json")));
  EXPECT_EQ(m["command"], "gen-data");
  EXPECT_EQ(m["config"]["dataset"]["episodes"], 6);
  const auto& art = m["artifacts"];
  ASSERT_EQ(art.size(), 1u);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(cli::fnv1a64(slurp(p("d/dataset.jsonl")))));
  EXPECT_EQ(art["dataset.jsonl"], hex);
  const auto data = envs::load_dataset(p("d/dataset.jsonl"));
  EXPECT_EQ(data.trajectories().size(), 6u);
}

TEST_F(Cli, PipelineIsByteReproducible) {
  ASSERT_EQ(run({"gen-data", "--config", cfg(), "--out", p("d")}).code, 0);
  const std::string data = p("d/dataset.jsonl");
  for (auto out : {"p1", "p2"}) {
    const auto r = run({"pretrain", "--config", cfg(), "--data", data, "--out", p(out)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  ASSERT_EQ(run({"pretrain", "--config", cfg(), "--data", data, "--out", p("pj"), "--jobs", "2"}).code, 0);
  for (auto out : {"f1", "f2"}) {
    const auto r = run({"finetune", "--config", cfg(), "--data", data, "--checkpoint", p("p1"), "--out", p(out)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const auto& rel : {"metrics.csv", "seed_3/metrics.csv", "seed_4/checkpoint.bin", "manifest.json"}) {
    EXPECT_EQ(slurp(p(std::string("p1/") + rel)), slurp(p(std::string("p2/") + rel))) << rel;
    EXPECT_EQ(slurp(p(std::string("p1/") + rel)), slurp(p(std::string("pj/") + rel))) << rel;
  }
  for (const auto& rel : {"metrics.csv", "summary.csv", "seed_3/checkpoint.bin", "manifest.json"}) {
    EXPECT_EQ(slurp(p(std::string("f1/") + rel)), slurp(p(std::string("f2/") + rel))) << rel;
  }
  EXPECT_TRUE(fs::exists(p("p1/seed_4/score_model.bin")));
  const auto ck = pipeline::load_checkpoint(p("f1/seed_3/checkpoint.bin"));
  EXPECT_EQ(ck.step, 24u);  // offline and online steps share one counter

  // --seed narrows the run to one seed.
  ASSERT_EQ(run({"finetune", "--config", cfg(), "--data", data, "--checkpoint", p("p1"), "--seed", "4", "--out",
                 p("f4")}).code,
            0);
  EXPECT_FALSE(fs::exists(p("f4/seed_3")));
  EXPECT_EQ(slurp(p("f4/seed_4/checkpoint.bin")), slurp(p("f1/seed_4/checkpoint.bin")));

  const auto line = run({"landscape-line", "--config", cfg(), "--offline", p("p1/seed_3/checkpoint.bin"), "--online",
                         p("f1/seed_3/checkpoint.bin"), "--points", "3", "--seed", "3", "--out", p("l")});
  ASSERT_EQ(line.code, 0) << line.err;
  // t = 0 is the J(pi_0) that the fine-tuning run reported for the same seed.
  const auto summary = slurp(p("f1/summary.csv"));
  const auto j0 = summary.substr(summary.find("\n3,") + 3).substr(0, summary.substr(summary.find("\n3,") + 3).find(','));
  const auto curve = slurp(p("l/curve.csv"));
  EXPECT_EQ(curve.substr(curve.find("\n0,") + 3).rfind(j0, 0), 0u) << curve << " vs " << j0;

  const auto plane = run({"landscape-plane", "--config", cfg(), "--theta", p("p1/seed_3/checkpoint.bin"), "--theta",
                          p("f1/seed_3/checkpoint.bin"), "--theta", p("f1/seed_4/checkpoint.bin"), "--resolution",
                          "3", "--jobs", "2", "--out", p("pl")});
  ASSERT_EQ(plane.code, 0) << plane.err;
  EXPECT_EQ(slurp(p("pl/grid.csv")).substr(0, 24), "t\\l,-0.20000000000000001");
  EXPECT_EQ(run({"landscape-plane", "--config", cfg(), "--theta", p("p1/seed_3/checkpoint.bin"), "--out", p("pl2")}).code,
            cli::kExitConfig);

  ASSERT_EQ(run({"export-checkpoints", "--checkpoint", p("p1/seed_3/checkpoint.bin"), "--checkpoint",
                 p("f1/seed_3/checkpoint.bin"), "--checkpoint", p("p1/seed_3/checkpoint.bin"), "--out", p("e")})
                .code,
            0);
  const auto matrix = slurp(p("e/checkpoints.csv"));
  EXPECT_EQ(std::count(matrix.begin(), matrix.end(), '\n'), 3);

  const auto reg = run({"regret-table", "--input", p("f1"), "--out", p("r")});
  ASSERT_EQ(reg.code, 0) << reg.err;
  EXPECT_NE(slurp(p("r/table.csv")).find("smac,sac,0\n"), std::string::npos);
}

TEST_F(Cli, BinaryExitCodes) {
  auto status = [](const std::string& cmd) {
    const int s = std::system(cmd.c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  const std::string bin = O2OLAB_BIN;
  EXPECT_EQ(status(bin + " --help > /dev/null"), 0);
  EXPECT_EQ(status(bin + " pretrain --bogus 2> /dev/null"), 2);
  EXPECT_EQ(status(bin + " verify-identity --out " + p("vb") + " > /dev/null"), 0);
  EXPECT_EQ(status(bin + " verify-identity --tolerance 0 --out " + p("vc") + " > /dev/null"), 3);
}
