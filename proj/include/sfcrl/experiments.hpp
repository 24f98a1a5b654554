#pragma once

// Experiment orchestration: training, seeded evaluation, the learning-rate
// / discount sweep, scenario series, and CSV/SVG reporting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sfcrl/agents.hpp"
#include "sfcrl/config.hpp"
#include "sfcrl/errors.hpp"
#include "sfcrl/format.hpp"
#include "sfcrl/nn.hpp"

namespace sfcrl::experiments {

namespace fs = std::filesystem;

struct MetricsRow {
  std::string run_id;  // run index, or median / mean / std for summaries
  std::optional<std::uint64_t> seed;
  std::string scenario;
  std::string agent;
  std::optional<double> acceptance_rate;
  std::optional<double> mean_energy_per_sfc;
  double requests = 0;
  double placed = 0;
  double accepted = 0;
  double rejected = 0;
  std::optional<double> cumulative_reward;
};

inline const char* kMetricsHeader =
    "run_id,seed,scenario,agent,acceptance_rate,mean_energy_per_sfc,requests,placed,"
    "accepted,rejected,cumulative_reward";

inline void write_row(std::ostream& os, const MetricsRow& r) {
  os << r.run_id << ',' << (r.seed ? std::to_string(*r.seed) : "") << ',' << r.scenario << ','
     << r.agent << ',' << format_optional(r.acceptance_rate) << ','
     << format_optional(r.mean_energy_per_sfc) << ',' << format_double(r.requests) << ','
     << format_double(r.placed) << ',' << format_double(r.accepted) << ','
     << format_double(r.rejected) << ',' << format_optional(r.cumulative_reward) << '\n';
}

// ------------------------------------------------------------------ CSV I/O

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline CsvTable read_csv(std::istream& is, const std::string& what = "csv") {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw UsageError(what + ": line " + std::to_string(lineno) + " has " +
                       std::to_string(cells.size()) + " fields, expected " +
                       std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw UsageError(what + ": no header row");
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open " + path);
  return read_csv(is, path);
}

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write " + path.string());
  return os;
}

// ----------------------------------------------------------------- summary

struct Summary {
  std::size_t count = 0;
  double median = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
};

inline std::optional<Summary> summarize(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  Summary s;
  s.count = v.size();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double sq = 0.0;
    for (double x : v) sq += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(n - 1));
  }
  return s;
}

// median / mean / std rows over the given per-run rows.
inline std::vector<MetricsRow> summary_rows(const std::vector<MetricsRow>& runs) {
  std::vector<MetricsRow> out;
  if (runs.empty()) return out;
  auto collect = [&](auto getter) {
    std::vector<double> v;
    for (const auto& r : runs) {
      std::optional<double> x = getter(r);
      if (x) v.push_back(*x);
    }
    return summarize(std::move(v));
  };
  const auto acc = collect([](const MetricsRow& r) { return r.acceptance_rate; });
  const auto energy = collect([](const MetricsRow& r) { return r.mean_energy_per_sfc; });
  const auto req = collect([](const MetricsRow& r) { return std::optional<double>(r.requests); });
  const auto pl = collect([](const MetricsRow& r) { return std::optional<double>(r.placed); });
  const auto ac = collect([](const MetricsRow& r) { return std::optional<double>(r.accepted); });
  const auto rj = collect([](const MetricsRow& r) { return std::optional<double>(r.rejected); });
  const auto cr = collect([](const MetricsRow& r) { return r.cumulative_reward; });
  for (int k = 0; k < 3; ++k) {
    auto pick = [k](const std::optional<Summary>& s) -> std::optional<double> {
      if (!s) return std::nullopt;
      return k == 0 ? s->median : k == 1 ? s->mean : s->stddev;
    };
    MetricsRow m;
    m.run_id = k == 0 ? "median" : k == 1 ? "mean" : "std";
    m.scenario = runs.front().scenario;
    m.agent = runs.front().agent;
    m.acceptance_rate = pick(acc);
    m.mean_energy_per_sfc = pick(energy);
    m.requests = pick(req).value_or(0);
    m.placed = pick(pl).value_or(0);
    m.accepted = pick(ac).value_or(0);
    m.rejected = pick(rj).value_or(0);
    m.cumulative_reward = pick(cr);
    out.push_back(m);
  }
  return out;
}

// ------------------------------------------------------------- evaluation

inline MetricsRow row_from(const SimulationReport& r) {
  MetricsRow m;
  m.acceptance_rate = r.acceptance_rate();
  m.mean_energy_per_sfc = r.mean_energy();
  m.requests = static_cast<double>(r.requests);
  m.placed = static_cast<double>(r.placed);
  m.accepted = static_cast<double>(r.accepted);
  m.rejected = static_cast<double>(r.rejected);
  return m;
}

inline MetricsRow row_from(const EpisodeStats& s) {
  MetricsRow m;
  m.acceptance_rate = s.acceptance_rate;
  m.mean_energy_per_sfc = s.mean_energy;
  m.requests = static_cast<double>(s.requests);
  m.placed = static_cast<double>(s.placed);
  m.accepted = static_cast<double>(s.accepted);
  m.rejected = static_cast<double>(s.rejected);
  m.cumulative_reward = s.cumulative_reward;
  return m;
}

// One seeded evaluation horizon for the configured agent. RL agents need
// a trained network.
inline MetricsRow evaluate_run(const ExperimentConfig& cfg, const nn::Mlp* net,
                               std::uint64_t seed, const std::string& scenario_label) {
  MetricsRow m;
  if (cfg.rl_agent()) {
    if (!net) throw UsageError("evaluation of " + cfg.agent + " needs a checkpoint");
    m = row_from(agents::evaluate_policy(*net, cfg.env, seed, cfg.eval_hours));
  } else {
    const Placer placer =
        cfg.agent == "greedy" ? agents::greedy_placer() : agents::random_placer();
    m = row_from(agents::run_baseline(placer, cfg.env.scenario, seed, cfg.eval_hours));
  }
  m.seed = seed;
  m.scenario = scenario_label;
  m.agent = cfg.agent;
  return m;
}

inline std::vector<MetricsRow> evaluate_runs(const ExperimentConfig& cfg, const nn::Mlp* net,
                                             const std::string& scenario_label) {
  std::vector<MetricsRow> rows;
  for (int r = 0; r < cfg.repetitions; ++r) {
    MetricsRow m = evaluate_run(cfg, net, cfg.seed + static_cast<std::uint64_t>(r),
                                scenario_label);
    m.run_id = std::to_string(r);
    rows.push_back(std::move(m));
  }
  return rows;
}

inline void write_metrics(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << kMetricsHeader << '\n';
  for (const auto& r : rows) write_row(os, r);
}

// ---------------------------------------------------------------- training

inline agents::TrainingResult train(const ExperimentConfig& cfg) {
  agents::TrainOptions opts{cfg.effective_training_steps(), cfg.seed, cfg.log_interval};
  if (cfg.agent == "a2c") return agents::train_a2c(cfg.env, cfg.a2c, opts);
  if (cfg.agent == "ppo2") return agents::train_ppo(cfg.env, cfg.ppo, opts);
  throw UsageError("train: agent must be ppo2 or a2c, got " + cfg.agent);
}

inline void write_curve(std::ostream& os, const std::vector<agents::CurvePoint>& curve) {
  os << "step,cumulative_reward,episode_reward_mean,entropy,policy_loss,value_loss\n";
  for (const auto& p : curve) {
    os << p.step << ',' << format_double(p.cumulative_reward) << ','
       << format_optional(p.episode_reward_mean) << ',' << format_double(p.entropy) << ','
       << format_double(p.policy_loss) << ',' << format_double(p.value_loss) << '\n';
  }
}

inline void write_episodes(std::ostream& os, const std::vector<agents::EpisodeRecord>& eps) {
  os << "episode,end_step,reward,requests,accepted,rejected,acceptance_rate\n";
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const auto& e = eps[i];
    os << i << ',' << e.end_step << ',' << format_double(e.reward) << ',' << e.stats.requests
       << ',' << e.stats.accepted << ',' << e.stats.rejected << ','
       << format_optional(e.stats.acceptance_rate) << '\n';
  }
}

struct TrainOutputs {
  fs::path checkpoint;
  fs::path curve;
  fs::path episodes;
};

inline TrainOutputs cmd_train(const ExperimentConfig& cfg, const fs::path& out_dir) {
  if (!cfg.rl_agent()) throw UsageError("train: agent must be ppo2 or a2c");
  agents::TrainingResult res = train(cfg);
  TrainOutputs out{out_dir / "checkpoint.bin", out_dir / "training_curve.csv",
                   out_dir / "episodes.csv"};
  {
    auto os = open_output(out.checkpoint);
    nn::save_checkpoint(res.net, os);
  }
  {
    auto os = open_output(out.curve);
    write_curve(os, res.curve);
  }
  {
    auto os = open_output(out.episodes);
    write_episodes(os, res.episodes);
  }
  return out;
}

inline std::vector<MetricsRow> cmd_evaluate(const ExperimentConfig& cfg,
                                            const std::optional<std::string>& checkpoint,
                                            const fs::path& out_dir) {
  std::optional<nn::Mlp> net;
  if (cfg.rl_agent()) {
    if (!checkpoint || !fs::exists(*checkpoint)) {
      throw UsageError("evaluate: " + cfg.agent + " requires an existing --checkpoint");
    }
    net = nn::load_checkpoint(*checkpoint);
    SfcEnv probe(cfg.env);
    if (net->shape().input != probe.observation_size() ||
        net->shape().actions != probe.action_count()) {
      throw UsageError("evaluate: checkpoint does not match the configured infrastructure");
    }
  }
  std::vector<MetricsRow> rows = evaluate_runs(cfg, net ? &*net : nullptr, cfg.scenario);
  auto summary = summary_rows(rows);
  std::vector<MetricsRow> all = rows;
  all.insert(all.end(), summary.begin(), summary.end());
  auto os = open_output(out_dir / "metrics.csv");
  write_metrics(os, all);
  return all;
}

// ------------------------------------------------------------------- sweep

struct SweepCell {
  double alpha = 0.0;
  double gamma = 0.0;
  std::vector<std::int64_t> steps;
  std::vector<double> mean_cumulative_reward;
  std::vector<std::optional<double>> mean_episode_reward;
  std::size_t runs = 0;
};

inline std::string cell_file_name(double alpha, double gamma) {
  return "curve_alpha" + format_double(alpha) + "_gamma" + format_double(gamma) + ".csv";
}

inline std::vector<SweepCell> cmd_sweep(const ExperimentConfig& base,
                                        const std::vector<double>& alphas,
                                        const std::vector<double>& gammas,
                                        const fs::path& out_dir) {
  if (alphas.empty() || gammas.empty()) throw UsageError("sweep: grids must be non-empty");
  if (!base.rl_agent()) throw UsageError("sweep: agent must be ppo2 or a2c");
  std::vector<SweepCell> cells;
  for (double alpha : alphas) {
    for (double gamma : gammas) {
      SweepCell cell{alpha, gamma, {}, {}, {}, 0};
      std::vector<std::vector<agents::CurvePoint>> curves;
      for (int rep = 0; rep < base.repetitions; ++rep) {
        ExperimentConfig c = base;
        c.seed = base.seed + static_cast<std::uint64_t>(rep);
        if (c.agent == "a2c") {
          c.a2c.lr = alpha;
          c.a2c.gamma = gamma;
        } else {
          c.ppo.lr = alpha;
          c.ppo.gamma = gamma;
        }
        curves.push_back(train(c).curve);
      }
      cell.runs = curves.size();
      std::size_t len = curves.front().size();
      for (const auto& cv : curves) len = std::min(len, cv.size());
      for (std::size_t i = 0; i < len; ++i) {
        double cum = 0.0;
        double ep = 0.0;
        std::size_t ep_n = 0;
        for (const auto& cv : curves) {
          cum += cv[i].cumulative_reward;
          if (cv[i].episode_reward_mean) {
            ep += *cv[i].episode_reward_mean;
            ++ep_n;
          }
        }
        cell.steps.push_back(curves.front()[i].step);
        cell.mean_cumulative_reward.push_back(cum / static_cast<double>(curves.size()));
        cell.mean_episode_reward.push_back(
            ep_n ? std::optional<double>(ep / static_cast<double>(ep_n)) : std::nullopt);
      }
      auto os = open_output(out_dir / cell_file_name(alpha, gamma));
      os << "step,mean_cumulative_reward,mean_episode_reward,runs\n";
      for (std::size_t i = 0; i < cell.steps.size(); ++i) {
        os << cell.steps[i] << ',' << format_double(cell.mean_cumulative_reward[i]) << ','
           << format_optional(cell.mean_episode_reward[i]) << ',' << cell.runs << '\n';
      }
      cells.push_back(std::move(cell));
    }
  }
  auto os = open_output(out_dir / "sweep_summary.csv");
  os << "agent,alpha,gamma,runs,final_step,final_mean_cumulative_reward,final_mean_episode_reward\n";
  for (const auto& c : cells) {
    const bool any = !c.steps.empty();
    os << base.agent << ',' << format_double(c.alpha) << ',' << format_double(c.gamma) << ','
       << c.runs << ',' << (any ? std::to_string(c.steps.back()) : "") << ','
       << (any ? format_double(c.mean_cumulative_reward.back()) : "") << ','
       << (any ? format_optional(c.mean_episode_reward.back()) : "") << '\n';
  }
  return cells;
}

// -------------------------------------------------------- scenario series

inline ExperimentConfig apply_axis(ExperimentConfig c, const std::string& axis, double value) {
  if (axis == "theta") {
    c.env.scenario.theta = value;
  } else if (axis == "customers") {
    c.env.scenario.customers = static_cast<int>(std::lround(value));
  } else if (axis == "capacity") {
    for (auto& g : c.env.scenario.infrastructure.groups) {
      g.capacity = static_cast<int>(std::lround(value));
    }
  } else {
    throw UsageError("scenario-series: axis must be theta, customers or capacity");
  }
  validate(c);
  return c;
}

// One block of per-seed rows (plus summaries) per axis value. RL agents are
// trained once per block before evaluation.
inline std::vector<MetricsRow> cmd_scenario_series(const ExperimentConfig& base,
                                                   const std::string& axis,
                                                   const std::vector<double>& values,
                                                   const fs::path& out_dir) {
  if (values.empty()) throw UsageError("scenario-series: no axis values");
  std::vector<MetricsRow> all;
  for (double v : values) {
    ExperimentConfig c = apply_axis(base, axis, v);
    const std::string label = axis + "=" + format_double(v);
    std::optional<nn::Mlp> net;
    if (c.rl_agent()) net = train(c).net;
    auto rows = evaluate_runs(c, net ? &*net : nullptr, label);
    auto summary = summary_rows(rows);
    all.insert(all.end(), rows.begin(), rows.end());
    all.insert(all.end(), summary.begin(), summary.end());
  }
  auto os = open_output(out_dir / "scenario_series.csv");
  write_metrics(os, all);
  return all;
}

// ------------------------------------------------------------------ report

struct ReportGroup {
  std::string scenario;
  std::string agent;
  std::vector<double> acceptance;
  std::optional<Summary> acceptance_summary;
  std::optional<Summary> energy_summary;
};

// Recomputes per-(scenario, agent) statistics from per-run rows of a
// metrics CSV, ignoring any summary rows it contains.
inline std::vector<ReportGroup> summarize_metrics(const CsvTable& t) {
  const auto run_col = t.column("run_id");
  const auto sc_col = t.column("scenario");
  const auto ag_col = t.column("agent");
  const auto acc_col = t.column("acceptance_rate");
  const auto en_col = t.column("mean_energy_per_sfc");
  if (!run_col || !sc_col || !ag_col || !acc_col || !en_col) {
    throw UsageError("report: not a metrics table");
  }
  std::vector<ReportGroup> groups;
  std::vector<std::vector<double>> energies;
  for (const auto& row : t.rows) {
    const std::string& id = row[*run_col];
    if (id.empty() || !std::all_of(id.begin(), id.end(), ::isdigit)) continue;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const ReportGroup& g) {
      return g.scenario == row[*sc_col] && g.agent == row[*ag_col];
    });
    if (it == groups.end()) {
      groups.push_back({row[*sc_col], row[*ag_col], {}, {}, {}});
      energies.emplace_back();
      it = groups.end() - 1;
    }
    const auto idx = static_cast<std::size_t>(it - groups.begin());
    if (auto a = parse_double(row[*acc_col])) it->acceptance.push_back(*a);
    if (auto e = parse_double(row[*en_col])) energies[idx].push_back(*e);
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    groups[i].acceptance_summary = summarize(groups[i].acceptance);
    groups[i].energy_summary = summarize(energies[i]);
  }
  return groups;
}

// Minimal box plot (min / quartiles / median / max) of acceptance rates.
inline void write_boxplot_svg(std::ostream& os, const std::vector<ReportGroup>& groups) {
  const double width = 120.0 * static_cast<double>(std::max<std::size_t>(groups.size(), 1)) + 80;
  const double height = 360.0;
  const double top = 20.0;
  const double plot_h = 280.0;
  auto y = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(width)
     << "\" height=\"" << format_double(height) << "\">\n";
  os << "<line x1=\"60\" y1=\"" << y(0) << "\" x2=\"60\" y2=\"" << y(1)
     << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    os << "<text x=\"10\" y=\"" << format_double(y(v) + 4) << "\" font-size=\"10\">"
       << format_double(v) << "</text>\n";
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto v = groups[i].acceptance;
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
      const double pos = p * static_cast<double>(v.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = static_cast<std::size_t>(std::ceil(pos));
      return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
    };
    const double cx = 100.0 + 120.0 * static_cast<double>(i);
    os << "<line x1=\"" << cx << "\" y1=\"" << format_double(y(v.front())) << "\" x2=\"" << cx
       << "\" y2=\"" << format_double(y(v.back())) << "\" stroke=\"black\"/>\n";
    os << "<rect x=\"" << cx - 25 << "\" y=\"" << format_double(y(q(0.75))) << "\" width=\"50\" height=\""
       << format_double(std::max(0.5, y(q(0.25)) - y(q(0.75))))
       << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << cx - 25 << "\" y1=\"" << format_double(y(q(0.5))) << "\" x2=\""
       << cx + 25 << "\" y2=\"" << format_double(y(q(0.5))) << "\" stroke=\"red\"/>\n";
    os << "<text x=\"" << cx - 50 << "\" y=\"" << format_double(height - 30)
       << "\" font-size=\"10\">" << groups[i].scenario << ' ' << groups[i].agent << "</text>\n";
  }
  os << "</svg>\n";
}

// Prints a summary of any CSV this tool writes. Metrics tables get
// per-group statistics; other tables a per-column digest.
inline void cmd_report(const std::string& csv_path, std::ostream& out,
                       const std::optional<std::string>& svg_path = std::nullopt) {
  const CsvTable t = read_csv_file(csv_path);
  if (t.column("acceptance_rate") && t.column("run_id")) {
    const auto groups = summarize_metrics(t);
    out << "scenario,agent,runs,acceptance_median,acceptance_mean,acceptance_std,"
           "energy_mean,energy_std\n";
    for (const auto& g : groups) {
      const auto& a = g.acceptance_summary;
      const auto& e = g.energy_summary;
      out << g.scenario << ',' << g.agent << ',' << (a ? a->count : 0) << ','
          << (a ? format_double(a->median) : "") << ',' << (a ? format_double(a->mean) : "")
          << ',' << (a ? format_double(a->stddev) : "") << ','
          << (e ? format_double(e->mean) : "") << ',' << (e ? format_double(e->stddev) : "")
          << '\n';
    }
    if (svg_path) {
      auto os = open_output(*svg_path);
      write_boxplot_svg(os, groups);
    }
    return;
  }
  out << "column,count,min,max,last\n";
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    std::size_t n = 0;
    double lo = 0, hi = 0, last = 0;
    for (const auto& row : t.rows) {
      auto v = parse_double(row[c]);
      if (!v) continue;
      if (n == 0 || *v < lo) lo = *v;
      if (n == 0 || *v > hi) hi = *v;
      last = *v;
      ++n;
    }
    out << t.header[c] << ',' << n << ',' << (n ? format_double(lo) : "") << ','
        << (n ? format_double(hi) : "") << ',' << (n ? format_double(last) : "") << '\n';
  }
}

}  // namespace sfcrl::experiments
