#include "run_config.hpp"
#include "sndiff/binary_io.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace sndiff;
using namespace sndiff::app;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SNDIFF_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json gaussian_config() {
  return json::parse(R"({
    "experiment": "cli_gauss",
    "seed": 7,
    "signal_prior": {"kind": "gaussian", "mean": [0.5, -0.5, 1.0, 0.0], "variance": [1.0, 0.5, 0.8, 1.2]},
    "noise_prior": {"kind": "gaussian", "mean": 0.0, "dim": 4, "variance": 0.3},
    "problem": {"count": 2, "operator": {"kind": "identity", "dim": 4},
                "signal": {"source": "prior"}, "noise": {"source": "prior"}},
    "sampler": {"steps": 60, "chains": 4}
  })");
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST(Config, DefaultsAreMaterialised) {
  const auto c = parse_config(gaussian_config());
  EXPECT_EQ(c.guidance.rule, Rule::PiGDM);
  EXPECT_EQ(c.sampler.steps, 60);
  EXPECT_DOUBLE_EQ(c.sigma, 25.0);
  EXPECT_EQ(c.resolved["guidance"]["r_sq"], "positive");
  EXPECT_EQ(c.resolved["sampler"]["order"], "dc_first");
  EXPECT_DOUBLE_EQ(c.resolved["schedule"]["sigma"].get<double>(), 25.0);
  // parsing the resolved config again is a fixed point
  EXPECT_EQ(parse_config(c.resolved).resolved, c.resolved);
}

TEST(Config, UnknownKeysRejected) {
  auto j = gaussian_config();
  j["sampler"]["stpes"] = 10;
  try {
    parse_config(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("stpes"), std::string::npos);
  }
  auto k = gaussian_config();
  k["guidance"] = {{"rule", "nope"}};
  EXPECT_THROW(parse_config(k), ConfigError);
}

TEST(Config, OverridesApply) {
  Overrides ov;
  ov.seed = 99;
  ov.rule = "dps";
  const auto c = parse_config(gaussian_config(), ov);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.guidance.rule, Rule::DPS);
}

TEST(Config, ProblemsAreDeterministic) {
  const auto c = parse_config(gaussian_config());
  const auto sx = build_prior(*c.signal_prior, c.schedule(), 1);
  const auto sn = build_prior(*c.noise_prior, c.schedule(), 2);
  const auto a = build_problem(c, 1, sx, sn), b = build_problem(c, 1, sx, sn);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(build_problem(c, 0, sx, sn).y, a.y);
}

TEST(Cli, MissingDatasetIsExit2) {
  const auto dir = sndiff::testing::temp_dir("cli_missing");
  const json j = json::parse(R"({"train": {"dataset": {"source": "file", "path": "/nonexistent/data.bin"}, "steps": 10}})");
  EXPECT_EQ(run_cli("train --config " + write_config(dir, j).string() + " --out " + (dir / "out").string(),
                    dir / "log.txt"),
            2);
}

TEST(Cli, TrainIsDeterministic) {
  const auto dir = sndiff::testing::temp_dir("cli_train");
  const json j = json::parse(R"({"seed": 3, "train": {"dataset": {"source": "prior", "count": 200,
      "prior": {"kind": "gaussian", "mean": [0.0, 1.0], "variance": 0.5}},
      "hidden": [8], "steps": 50, "batch_size": 16}})");
  const auto cfg = write_config(dir, j);
  ASSERT_EQ(run_cli("train --config " + cfg.string() + " --out " + (dir / "a").string(), dir / "la.txt"), 0);
  ASSERT_EQ(run_cli("train --config " + cfg.string() + " --out " + (dir / "b").string(), dir / "lb.txt"), 0);
  EXPECT_EQ(slurp(dir / "a" / "model.bin"), slurp(dir / "b" / "model.bin"));
  EXPECT_FALSE(slurp(dir / "a" / "model.bin").empty());
  EXPECT_TRUE(fs::exists(dir / "a" / "loss.csv"));
}

TEST(Cli, SampleLayoutDeterminismAndEval) {
  const auto dir = sndiff::testing::temp_dir("cli_sample");
  const auto cfg = write_config(dir, gaussian_config());
  ASSERT_EQ(run_cli("sample --config " + cfg.string() + " --out " + (dir / "a").string(), dir / "la.txt"), 0);
  ASSERT_EQ(run_cli("sample --config " + cfg.string() + " --out " + (dir / "b").string(), dir / "lb.txt"), 0);
  for (int c = 0; c < 4; ++c) {
    const std::string f = "chain_000" + std::to_string(c) + "_x0.bin";
    ASSERT_TRUE(fs::exists(dir / "a" / "problem_0000" / f)) << f;
    EXPECT_EQ(slurp(dir / "a" / "problem_0000" / f), slurp(dir / "b" / "problem_0000" / f));
  }
  EXPECT_FALSE(fs::exists(dir / "a" / "problem_0000" / "chain_0004_x0.bin"));
  EXPECT_TRUE(fs::exists(dir / "a" / "problem_0001" / "diagnostics.csv"));

  // the resolved config reproduces the run
  ASSERT_EQ(run_cli("sample --config " + (dir / "a" / "resolved_config.json").string() + " --out " +
                        (dir / "c").string(),
                    dir / "lc.txt"),
            0);
  EXPECT_EQ(slurp(dir / "a" / "problem_0001" / "chain_0002_n0.bin"),
            slurp(dir / "c" / "problem_0001" / "chain_0002_n0.bin"));

  // initial states do not depend on the rule
  ASSERT_EQ(run_cli("sample --config " + cfg.string() + " --rule dps --out " + (dir / "d").string(), dir / "ld.txt"),
            0);
  EXPECT_EQ(read_array(dir / "a" / "problem_0000" / "init_x.bin"),
            read_array(dir / "d" / "problem_0000" / "init_x.bin"));
  EXPECT_EQ(read_array(dir / "a" / "problem_0000" / "init_n.bin"),
            read_array(dir / "d" / "problem_0000" / "init_n.bin"));

  EXPECT_NE(read_array(dir / "a" / "problem_0000" / "init_x.bin"),
            read_array(dir / "a" / "problem_0001" / "init_x.bin"));

  ASSERT_EQ(run_cli("eval " + (dir / "a").string(), dir / "le.txt"), 0);
  const json summary = json::parse(slurp(dir / "a" / "eval_summary.json"));
  ASSERT_EQ(summary["oracle"].size(), 2u);
  EXPECT_TRUE(summary["oracle"][0]["mean_rel_err"].is_number());
  EXPECT_TRUE(fs::exists(dir / "a" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "a" / "oracle.csv"));
}

TEST(Cli, EvalOnEmptyDirectoryIsExit2) {
  const auto dir = sndiff::testing::temp_dir("cli_eval_empty");
  EXPECT_EQ(run_cli("eval " + (dir / "run").string(), dir / "log.txt"), 2);
  fs::create_directories(dir / "run");
  EXPECT_EQ(run_cli("eval " + (dir / "run").string(), dir / "log.txt"), 2);
}

TEST(Cli, BenchWarnsOnFewRepeats) {
  const auto dir = sndiff::testing::temp_dir("cli_bench");
  const json j = json::parse(R"({"bench": {"steps": [5], "dims": [8], "repeats": 1}})");
  ASSERT_EQ(run_cli("bench --config " + write_config(dir, j).string() + " --out " + (dir / "out").string(),
                    dir / "log.txt"),
            0);
  EXPECT_NE(slurp(dir / "log.txt").find("warning"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "bench.csv"));
}

TEST(Cli, BadArgumentsAreExit2) {
  const auto dir = sndiff::testing::temp_dir("cli_args");
  EXPECT_EQ(run_cli("sample", dir / "log.txt"), 2);
  EXPECT_EQ(run_cli("frobnicate", dir / "log.txt"), 2);
  auto j = gaussian_config();
  j["extra"] = 1;
  EXPECT_EQ(run_cli("sample --config " + write_config(dir, j).string(), dir / "log.txt"), 2);
}
