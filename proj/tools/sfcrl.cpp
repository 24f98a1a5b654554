// sfcrl command line: train, evaluate, sweep, scenario-series, report, rbd.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfcrl/config.hpp"
#include "sfcrl/experiments.hpp"
#include "sfcrl/rbd.hpp"

namespace {

using namespace sfcrl;
namespace ex = sfcrl::experiments;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<std::int64_t> steps;
  std::optional<double> horizon;
  std::optional<int> servers;
  std::optional<std::string> agent;
  std::string out = "out";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config");
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--reps", f.reps, "repetitions")->check(CLI::PositiveNumber);
  cmd->add_option("--steps", f.steps, "training steps")->check(CLI::PositiveNumber);
  cmd->add_option("--horizon-hours", f.horizon, "evaluation horizon in hours")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--servers", f.servers, "scale the server count")->check(CLI::PositiveNumber);
  cmd->add_option("--agent", f.agent, "ppo2 | a2c | greedy | random");
  cmd->add_option("--out", f.out, "output directory");
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (f.config.empty()) apply_table1(c);
  if (f.seed) c.seed = *f.seed;
  if (f.reps) c.repetitions = *f.reps;
  if (f.steps) c.training_steps = *f.steps;
  if (f.horizon) c.eval_hours = *f.horizon;
  if (f.servers) scale_servers(c, *f.servers);
  if (f.agent) c.agent = *f.agent;
  validate(c);
  return c;
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    auto v = parse_double(item);
    if (!v) throw UsageError(std::string(what) + ": cannot parse '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw UsageError(std::string(what) + ": empty list");
  return out;
}

void print_summary(const std::vector<ex::MetricsRow>& rows) {
  for (const auto& r : rows) {
    if (r.run_id == "median" || r.run_id == "mean" || r.run_id == "std") {
      std::cout << r.scenario << ' ' << r.agent << ' ' << r.run_id
                << " acceptance=" << format_optional(r.acceptance_rate)
                << " energy=" << format_optional(r.mean_energy_per_sfc) << '\n';
    }
  }
}

// Runs seed `c.seed` once with the given baseline and writes the event trace.
void write_trace(const ExperimentConfig& c, const std::string& path) {
  if (c.rl_agent()) throw UsageError("--trace is available for greedy and random agents");
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write " + path);
  SimState sim(c.env.scenario, c.seed);
  sim.set_trace(&os);
  sim.schedule_initial_events();
  sim.run_until(c.eval_hours,
                c.agent == "greedy" ? agents::greedy_placer() : agents::random_placer());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SFC placement with availability-aware reinforcement learning"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, sweep_f, series_f, rbd_f;

  auto* train = app.add_subcommand("train", "train a ppo2 or a2c agent");
  add_common(train, train_f);

  auto* evaluate = app.add_subcommand("evaluate", "seeded evaluation of an agent or baseline");
  add_common(evaluate, eval_f);
  std::optional<std::string> checkpoint;
  std::optional<std::string> trace;
  evaluate->add_option("--checkpoint", checkpoint, "trained network for RL agents");
  evaluate->add_option("--trace", trace, "event trace CSV for the first seed (baselines)");

  auto* sweep = app.add_subcommand("sweep", "learning-rate x discount grid");
  add_common(sweep, sweep_f);
  std::string alphas = "0.00005,0.00025,0.0005,0.00075";
  std::string gammas = "0.85,0.9,0.99,0.95";
  sweep->add_option("--alphas", alphas, "comma separated learning rates");
  sweep->add_option("--gammas", gammas, "comma separated discount factors");

  auto* series = app.add_subcommand("scenario-series", "train and evaluate along one axis");
  add_common(series, series_f);
  std::string axis;
  std::string values;
  series->add_option("--axis", axis, "theta | customers | capacity")->required();
  series->add_option("--values", values, "comma separated axis values")->required();

  auto* report = app.add_subcommand("report", "summarize a CSV written by this tool");
  std::string report_csv;
  std::optional<std::string> svg;
  report->add_option("csv", report_csv, "CSV file")->required();
  report->add_option("--svg", svg, "write an acceptance-rate box plot");

  auto* rbd_cmd = app.add_subcommand("rbd", "print the RBD of a placement");
  add_common(rbd_cmd, rbd_f);
  std::vector<std::string> assigns;
  rbd_cmd->add_option("--assign", assigns, "server:q per chain position, in order")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto c = resolve(train_f);
      const auto out = ex::cmd_train(c, train_f.out);
      std::cout << "checkpoint " << out.checkpoint.string() << '\n'
                << "curve " << out.curve.string() << '\n';
    } else if (evaluate->parsed()) {
      const auto c = resolve(eval_f);
      if (trace) write_trace(c, *trace);
      print_summary(ex::cmd_evaluate(c, checkpoint, eval_f.out));
    } else if (sweep->parsed()) {
      const auto c = resolve(sweep_f);
      const auto cells = ex::cmd_sweep(c, parse_list(alphas, "--alphas"),
                                       parse_list(gammas, "--gammas"), sweep_f.out);
      for (const auto& cell : cells) {
        std::cout << "alpha=" << format_double(cell.alpha)
                  << " gamma=" << format_double(cell.gamma) << " final_cumulative_reward="
                  << (cell.mean_cumulative_reward.empty()
                          ? std::string()
                          : format_double(cell.mean_cumulative_reward.back()))
                  << '\n';
      }
    } else if (series->parsed()) {
      const auto c = resolve(series_f);
      print_summary(ex::cmd_scenario_series(c, axis, parse_list(values, "--values"),
                                            series_f.out));
    } else if (report->parsed()) {
      ex::cmd_report(report_csv, std::cout, svg);
    } else if (rbd_cmd->parsed()) {
      const auto c = resolve(rbd_f);
      const auto servers = build_infrastructure(c.env.scenario.infrastructure);
      Placement p;
      p.request = 0;
      for (const auto& a : assigns) {
        const auto colon = a.find(':');
        const auto s = colon == std::string::npos ? std::nullopt
                                                  : parse_double(a.substr(0, colon));
        const auto q = colon == std::string::npos ? std::nullopt : parse_double(a.substr(colon + 1));
        if (!s || !q || *s < 0 || *q < 1 || *s != std::floor(*s) || *q != std::floor(*q)) {
          throw UsageError("--assign expects server:q, got " + a);
        }
        if (*s >= static_cast<double>(servers.size()) || *q > c.env.scenario.vm_max) {
          throw UsageError("--assign out of range: " + a);
        }
        p.assignments.push_back({static_cast<ServerId>(*s), static_cast<int>(*q)});
      }
      p.complete = true;
      const auto block = rbd::sfc_rbd(p, servers, c.env.scenario.vnf_availability());
      rbd::print(std::cout, block);
      std::cout << "availability " << format_double(rbd::evaluate(block)) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
