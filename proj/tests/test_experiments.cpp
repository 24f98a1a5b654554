#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sfcrl/config.hpp"
#include "sfcrl/experiments.hpp"

using namespace sfcrl;
namespace ex = sfcrl::experiments;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sfcrl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig tiny(const std::string& agent) {
  ExperimentConfig c = config_from_string(
      R"({"scenario":"custom","servers":3,"customers":1,"agent":")" + agent +
      R"(","repetitions":3,"eval_hours":3000,"training_steps":400,"log_interval":100})");
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SFCRL_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(LoadConfig, EmptyFileIsError) {
  const auto dir = scratch("empty");
  std::ofstream(dir / "c.json") << "  \n";
  EXPECT_THROW(load_config((dir / "c.json").string()), ConfigError);
  EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
}

TEST(LoadConfig, MinimalIsFullyDefaulted) {
  const auto c = config_from_string(R"({"scenario":"table1","agent":"greedy"})");
  const auto servers = build_infrastructure(c.env.scenario.infrastructure);
  EXPECT_EQ(servers.size(), 28u);
  EXPECT_EQ(servers[0].spec().capacity, 10);
  EXPECT_EQ(c.env.scenario.customers, 5);
  EXPECT_EQ(c.env.scenario.theta, 0.999);
  EXPECT_EQ(c.env.scenario.vm_max, 4);
  EXPECT_EQ(c.env.scenario.lambda, 0.04);
  EXPECT_EQ(c.env.scenario.mu, 1000.0);
  EXPECT_EQ(c.env.scenario.vnf_mttf, 2880.0);
  EXPECT_EQ(c.env.scenario.vnf_mttr, 0.17);
  EXPECT_EQ(c.env.rho, 1000.0);
  EXPECT_EQ(c.env.sigma, 0.005);
  EXPECT_EQ(c.repetitions, 30);
  EXPECT_EQ(c.a2c.gamma, 0.99);
  EXPECT_EQ(c.ppo.gamma, 0.85);
  EXPECT_EQ(c.a2c.lr, 0.00005);
}

TEST(LoadConfig, ValidationErrors) {
  EXPECT_THROW(config_from_string(R"({"theta":1.0})"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"theta":0})"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"repetitions":0})"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"lambda":-1})"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"agent":"dqn"})"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"bogus":1})"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"ppo":{"clip":0}})"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"servers":0})"), ConfigError);
}

TEST(LoadConfig, ParseErrorHasLineContext) {
  try {
    config_from_string("{\n  \"theta\": 0.99,\n  \"agent\": greedy\n}", "cfg.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(LoadConfig, Table3AndTopology) {
  const auto c = config_from_string(R"({"scenario":"table3"})");
  EXPECT_EQ(c.env.scenario.customers, 10);
  EXPECT_EQ(c.env.scenario.theta, 0.99955);
  EXPECT_EQ(c.eval_hours, 43800.0);
  const auto dir = scratch("topo");
  std::ofstream(dir / "t.json")
      << R"({"servers":[{"name":"a","group":1},{"name":"b","group":2},{"name":"c","group":2}],)"
      << R"("groups":{"2":{"mttf":7884,"capacity":6}},"links":[["a","b"]]})";
  std::ofstream(dir / "c.json") << R"({"scenario":"custom","topology":"t.json"})";
  const auto t = load_config((dir / "c.json").string());
  const auto servers = build_infrastructure(t.env.scenario.infrastructure);
  ASSERT_EQ(servers.size(), 3u);
  EXPECT_EQ(servers[0].spec().name, "a");
  EXPECT_EQ(servers[1].spec().mttf, 7884.0);
  EXPECT_EQ(servers[2].spec().capacity, 6);
}

TEST(LoadConfig, ShippedConfigsLoad) {
  const fs::path root = fs::path(SFCRL_SOURCE_DIR);
  int n = 0;
  for (const auto& e : fs::directory_iterator(root / "configs")) {
    EXPECT_NO_THROW(load_config(e.path().string())) << e.path();
    ++n;
  }
  EXPECT_GT(n, 0);
  const auto c = load_config((root / "configs" / "table1_greedy.json").string());
  const auto servers = build_infrastructure(c.env.scenario.infrastructure);
  ASSERT_EQ(servers.size(), 28u);
}

TEST(TrainingSteps, ModeDefaults) {
  ExperimentConfig c;
  c.mode = "parametrization";
  EXPECT_EQ(c.effective_training_steps(), 87600);
  c.mode = "scenario";
  EXPECT_EQ(c.effective_training_steps(), 500000);
  c.training_steps = 7;
  EXPECT_EQ(c.effective_training_steps(), 7);
}

TEST(Summary, MatchesIndependentRecomputation) {
  std::vector<ex::MetricsRow> rows;
  RngStream rng(1, 0);
  std::vector<double> vals;
  for (int i = 0; i < 7; ++i) {
    ex::MetricsRow r;
    r.run_id = std::to_string(i);
    r.acceptance_rate = rng.uniform01();
    vals.push_back(*r.acceptance_rate);
    rows.push_back(r);
  }
  const auto s = ex::summary_rows(rows);
  ASSERT_EQ(s.size(), 3u);
  std::vector<double> sorted = vals;
  std::sort(sorted.begin(), sorted.end());
  double mean = 0;
  for (double v : vals) mean += v;
  mean /= 7;
  double ss = 0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  EXPECT_NEAR(*s[0].acceptance_rate, sorted[3], 1e-9);
  EXPECT_NEAR(*s[1].acceptance_rate, mean, 1e-9);
  EXPECT_NEAR(*s[2].acceptance_rate, std::sqrt(ss / 6), 1e-9);
}

TEST(Evaluate, RowsBoundedAndSeedsReproduce) {
  const auto dir = scratch("eval");
  const auto c = tiny("greedy");
  const auto rows = ex::cmd_evaluate(c, std::nullopt, dir);
  ASSERT_EQ(rows.size(), 6u);
  for (int i = 0; i < 3; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    ASSERT_TRUE(r.acceptance_rate.has_value());
    EXPECT_GE(*r.acceptance_rate, 0.0);
    EXPECT_LE(*r.acceptance_rate, 1.0);
    EXPECT_EQ(*r.seed, c.seed + static_cast<std::uint64_t>(i));
    const auto again = ex::evaluate_run(c, nullptr, *r.seed, c.scenario);
    EXPECT_EQ(again.acceptance_rate, r.acceptance_rate);
    EXPECT_EQ(again.requests, r.requests);
  }
  EXPECT_EQ(rows[3].run_id, "median");
}

TEST(Evaluate, MissingCheckpointIsUsageError) {
  const auto dir = scratch("nockpt");
  EXPECT_THROW(ex::cmd_evaluate(tiny("ppo2"), std::nullopt, dir), UsageError);
  EXPECT_THROW(ex::cmd_evaluate(tiny("a2c"), (dir / "none.bin").string(), dir), UsageError);
}

TEST(TrainEvaluate, CheckpointFlowAndMonotoneCurve) {
  const auto dir = scratch("train");
  const auto c = tiny("a2c");
  const auto out = ex::cmd_train(c, dir);
  const auto curve = ex::read_csv_file(out.curve.string());
  ASSERT_EQ(curve.rows.size(), 4u);
  for (std::size_t i = 1; i < curve.rows.size(); ++i) {
    EXPECT_LT(std::stoll(curve.rows[i - 1][0]), std::stoll(curve.rows[i][0]));
  }
  const auto rows = ex::cmd_evaluate(c, out.checkpoint.string(), dir);
  EXPECT_EQ(rows.size(), 6u);
  EXPECT_TRUE(rows[0].cumulative_reward.has_value());
}

TEST(Report, RoundTripsEveryCsv) {
  const auto dir = scratch("report");
  const auto c = tiny("a2c");
  const auto out = ex::cmd_train(c, dir);
  ex::cmd_evaluate(c, out.checkpoint.string(), dir);
  ExperimentConfig g = tiny("greedy");
  ex::cmd_scenario_series(g, "theta", {0.99, 0.999}, dir);
  ExperimentConfig s = tiny("a2c");
  s.repetitions = 1;
  ex::cmd_sweep(s, {5e-5}, {0.9}, dir);
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ostringstream os;
    EXPECT_NO_THROW(ex::cmd_report(e.path().string(), os)) << e.path();
    EXPECT_FALSE(os.str().empty());
    ++n;
  }
  EXPECT_GE(n, 6);
  std::ostringstream os;
  ex::cmd_report((dir / "metrics.csv").string(), os, (dir / "box.svg").string());
  EXPECT_NE(slurp(dir / "box.svg").find("<svg"), std::string::npos);
}

TEST(Report, RecomputesSummary) {
  const auto dir = scratch("recompute");
  const auto rows = ex::cmd_evaluate(tiny("greedy"), std::nullopt, dir);
  const auto groups = ex::summarize_metrics(ex::read_csv_file((dir / "metrics.csv").string()));
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_NEAR(groups[0].acceptance_summary->median, *rows[3].acceptance_rate, 1e-9);
  EXPECT_NEAR(groups[0].acceptance_summary->mean, *rows[4].acceptance_rate, 1e-9);
  EXPECT_NEAR(groups[0].acceptance_summary->stddev, *rows[5].acceptance_rate, 1e-9);
}

TEST(Csv, RejectsRaggedRows) {
  std::istringstream is("a,b\n1,2\n3\n");
  EXPECT_THROW(ex::read_csv(is), UsageError);
  std::istringstream quoted("a,b\n\"x,y\",2\n");
  const auto t = ex::read_csv(quoted);
  EXPECT_EQ(t.rows[0][0], "x,y");
}

TEST(Sweep, OneCurveFilePerCell) {
  const auto dir = scratch("sweep");
  ExperimentConfig c = tiny("ppo2");
  c.repetitions = 2;
  c.ppo.n_steps = 50;
  c.ppo.minibatches = 2;
  const auto cells = ex::cmd_sweep(c, {5e-5, 7.5e-4}, {0.85, 0.99}, dir);
  EXPECT_EQ(cells.size(), 4u);
  for (const auto& cell : cells) {
    EXPECT_EQ(cell.runs, 2u);
    EXPECT_TRUE(fs::exists(dir / ex::cell_file_name(cell.alpha, cell.gamma)));
  }
  EXPECT_TRUE(fs::exists(dir / "sweep_summary.csv"));
  EXPECT_THROW(ex::cmd_sweep(c, {}, {0.9}, dir), UsageError);
}

TEST(ScenarioSeries, BlocksPerValue) {
  const auto dir = scratch("series");
  const auto c = tiny("greedy");
  const auto theta = ex::cmd_scenario_series(c, "theta", {0.9995, 0.99955, 0.9996, 0.99965}, dir);
  EXPECT_EQ(theta.size(), 4u * 6);
  const auto cap = ex::cmd_scenario_series(c, "capacity", {4, 8, 16}, dir);
  EXPECT_EQ(cap.size(), 3u * 6);
  EXPECT_EQ(cap[0].scenario, "capacity=4");
  const auto cust = ex::cmd_scenario_series(c, "customers", {1, 2}, dir);
  EXPECT_EQ(cust.size(), 2u * 6);
  EXPECT_THROW(ex::cmd_scenario_series(c, "bogus", {1}, dir), UsageError);
  EXPECT_THROW(ex::cmd_scenario_series(c, "theta", {}, dir), UsageError);
}

TEST(Cli, ByteIdenticalReruns) {
  const auto dir = scratch("cli");
  std::ofstream(dir / "c.json")
      << R"({"scenario":"custom","servers":3,"customers":1,"agent":"a2c","training_steps":300,)"
      << R"("log_interval":100,"repetitions":2,"eval_hours":2000})";
  const std::string cfg = (dir / "c.json").string();
  for (const char* run : {"a", "b"}) {
    const std::string out = (dir / run).string();
    ASSERT_EQ(run_cli("train --config " + cfg + " --out " + out), 0);
    ASSERT_EQ(run_cli("evaluate --config " + cfg + " --checkpoint " + out +
                      "/checkpoint.bin --out " + out),
              0);
  }
  for (const char* f : {"training_curve.csv", "episodes.csv", "metrics.csv", "checkpoint.bin"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli_err");
  std::ofstream(dir / "bad.json") << R"({"nope":1})";
  EXPECT_EQ(run_cli("evaluate --config " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("evaluate --agent ppo2 --out " + dir.string()), 2);
  EXPECT_NE(run_cli("frobnicate"), 0);
  EXPECT_EQ(run_cli("rbd --assign 0:2 --assign 1:1"), 0);
  EXPECT_EQ(run_cli("rbd --assign 0:9"), 2);
}
