#pragma once

// Experiment configuration: scenario presets, JSON loading with strict key
// checking, and topology files.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfcrl/agents.hpp"
#include "sfcrl/env.hpp"
#include "sfcrl/errors.hpp"

namespace sfcrl {

struct ExperimentConfig {
  std::string scenario = "table1";  // table1 | table3 | custom
  std::string topology;             // optional topology file
  std::string mode = "scenario";    // scenario | parametrization
  EnvConfig env;
  std::string agent = "greedy";  // ppo2 | a2c | greedy | random
  agents::A2cConfig a2c;
  agents::PpoConfig ppo;
  std::int64_t training_steps = 0;  // 0: mode default
  std::int64_t log_interval = 1000;
  double eval_hours = 43800.0;
  int repetitions = 30;
  std::uint64_t seed = 1;

  std::int64_t effective_training_steps() const {
    if (training_steps > 0) return training_steps;
    // One-year episodes x 10 for the parameter sweep; 500k otherwise.
    return mode == "parametrization" ? 8760 * 10 : 500000;
  }
  bool rl_agent() const { return agent == "ppo2" || agent == "a2c"; }
};

inline ServerGroup table1_group(int label) {
  ServerGroup g;
  g.label = label;
  g.count = 0;
  return g;
}

// table1 defaults: 28 servers x 10 units, MTTF 8760 h, MTTR 1.667 h,
// 5 customers, theta 99.9 %.
inline void apply_table1(ExperimentConfig& c) {
  ServerGroup g1 = table1_group(1);
  g1.count = 28;
  ServerGroup g2 = table1_group(2);
  c.env.scenario.infrastructure.groups = {g1, g2};
  c.env.scenario.customers = 5;
  c.env.scenario.theta = 0.999;
}

// table3 variation: two groups of 14 (MTTF 8760 h / 7884 h), 10
// customers, theta 99.955 %, five-year evaluation.
inline void apply_table3(ExperimentConfig& c) {
  ServerGroup g1 = table1_group(1);
  g1.count = 14;
  ServerGroup g2 = table1_group(2);
  g2.count = 14;
  g2.mttf = 7884.0;
  c.env.scenario.infrastructure.groups = {g1, g2};
  c.env.scenario.customers = 10;
  c.env.scenario.theta = 0.99955;
  c.eval_hours = 43800.0;
}

// Rescales group counts to `total` servers, keeping proportions.
inline void scale_servers(ExperimentConfig& c, int total) {
  if (total < 1) throw ConfigError("servers must be >= 1");
  auto& groups = c.env.scenario.infrastructure.groups;
  c.env.scenario.infrastructure.named_servers.clear();
  int current = 0;
  for (const auto& g : groups) current += g.count;
  if (current == 0) throw ConfigError("no servers to scale");
  int assigned = 0;
  int last_nonempty = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].count > 0) last_nonempty = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (static_cast<int>(i) == last_nonempty) continue;
    const int n = groups[i].count * total / current;
    groups[i].count = n;
    assigned += n;
  }
  groups[static_cast<std::size_t>(last_nonempty)].count = total - assigned;
}

namespace detail {

inline std::string line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline nlohmann::json parse_json_text(const std::string& text,
                                      const std::string& what) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ConfigError(what + ": file is empty");
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(what + ": parse error at " +
                      line_context(text, e.byte > 0 ? e.byte - 1 : 0) + ": " +
                      e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

inline void apply_group_block(const nlohmann::json& j, ServerGroup& g, const std::string& where) {
  check_keys(j, {"count", "capacity", "mttf", "mttr", "cpu_power", "mem_power"}, where);
  get_if(j, "count", g.count, where);
  get_if(j, "capacity", g.capacity, where);
  get_if(j, "mttf", g.mttf, where);
  get_if(j, "mttr", g.mttr, where);
  get_if(j, "cpu_power", g.cpu_power, where);
  get_if(j, "mem_power", g.mem_power, where);
}

inline ServerGroup& group_by_label(ExperimentConfig& c, int label) {
  auto& groups = c.env.scenario.infrastructure.groups;
  for (auto& g : groups) {
    if (g.label == label) return g;
  }
  ServerGroup g = table1_group(label);
  groups.push_back(g);
  return groups.back();
}

}  // namespace detail

// Topology file: {"servers": [{"name", "group"}...], "groups": {"<label>":
// {...}}, "links": [...]}. Links are accepted and ignored.
inline void load_topology(ExperimentConfig& c, const std::string& path) {
  const nlohmann::json j = detail::parse_json_text(detail::read_file(path), path);
  detail::check_keys(j, {"name", "description", "servers", "groups", "links"}, path);
  if (!j.contains("servers") || !j["servers"].is_array() || j["servers"].empty()) {
    throw ConfigError(path + ": 'servers' must be a non-empty array");
  }
  if (j.contains("groups")) {
    for (const auto& [label, block] : j["groups"].items()) {
      int l = 0;
      try {
        l = std::stoi(label);
      } catch (const std::exception&) {
        throw ConfigError(path + ": group labels must be integers");
      }
      detail::apply_group_block(block, detail::group_by_label(c, l), path + " group " + label);
    }
  }
  auto& named = c.env.scenario.infrastructure.named_servers;
  named.clear();
  for (const auto& s : j["servers"]) {
    detail::check_keys(s, {"name", "group"}, path + " server");
    std::string name = s.value("name", "s" + std::to_string(named.size()));
    int group = s.value("group", 1);
    detail::group_by_label(c, group);
    named.emplace_back(std::move(name), group);
  }
}

inline void validate(const ExperimentConfig& c) {
  const auto& s = c.env.scenario;
  if (!(s.theta > 0.0 && s.theta < 1.0)) throw ConfigError("theta must lie in (0, 1)");
  if (!(s.lambda > 0.0) || !(s.mu > 0.0)) throw ConfigError("lambda and mu must be positive");
  if (!(s.vnf_mttf > 0.0) || !(s.vnf_mttr > 0.0)) {
    throw ConfigError("vnf_mttf and vnf_mttr must be positive");
  }
  if (s.customers < 1) throw ConfigError("customers must be >= 1");
  if (s.vm_max < 1) throw ConfigError("vm_max must be >= 1");
  if (s.shape.min_length < 1 || s.shape.max_length < s.shape.min_length) {
    throw ConfigError("invalid SFC length range");
  }
  for (const auto& v : s.catalog) {
    if (v.resource_demand < 1) throw ConfigError("VNF demand must be >= 1");
  }
  if (s.catalog.empty()) throw ConfigError("VNF catalog is empty");
  if (c.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (!(c.eval_hours > 0.0) || !(c.env.episode_hours > 0.0)) {
    throw ConfigError("horizons must be positive");
  }
  if (c.env.max_retries < 1) throw ConfigError("max_retries must be >= 1");
  if (c.agent != "ppo2" && c.agent != "a2c" && c.agent != "greedy" && c.agent != "random") {
    throw ConfigError("agent must be one of ppo2, a2c, greedy, random");
  }
  if (c.mode != "scenario" && c.mode != "parametrization") {
    throw ConfigError("mode must be scenario or parametrization");
  }
  c.a2c.validate();
  c.ppo.validate();
  build_infrastructure(s.infrastructure);  // throws on empty/invalid groups
}

inline ExperimentConfig config_from_json(const nlohmann::json& j, const std::string& where,
                                         const std::string& base_dir = {}) {
  using detail::get_if;
  detail::check_keys(
      j,
      {"scenario", "topology", "mode", "servers", "groups", "capacity", "server_mttr",
       "vnf_mttf", "vnf_mttr", "cpu_power", "mem_power", "vm_max", "customers", "theta",
       "lambda", "mu", "sfc_min_length", "sfc_max_length", "catalog", "rho", "sigma",
       "max_retries", "episode_hours", "max_episode_steps", "agent", "a2c", "ppo",
       "training_steps", "log_interval", "eval_hours", "repetitions", "seed"},
      where);
  ExperimentConfig c;
  get_if(j, "scenario", c.scenario, where);
  if (c.scenario == "table1" || c.scenario == "custom") {
    apply_table1(c);
  } else if (c.scenario == "table3") {
    apply_table3(c);
  } else {
    throw ConfigError(where + ": scenario must be table1, table3 or custom");
  }
  if (j.contains("groups")) {
    const auto& g = j["groups"];
    if (!g.is_array() || g.empty()) throw ConfigError(where + ": 'groups' must be a non-empty array");
    auto& groups = c.env.scenario.infrastructure.groups;
    groups.clear();
    int label = 1;
    for (const auto& block : g) {
      ServerGroup sg = table1_group(label++);
      nlohmann::json b = block;
      if (b.contains("label")) {
        sg.label = b["label"].get<int>();
        b.erase("label");
      }
      detail::apply_group_block(b, sg, where + " groups");
      groups.push_back(sg);
    }
  }
  get_if(j, "topology", c.topology, where);
  if (!c.topology.empty()) {
    std::string path = c.topology;
    if (!base_dir.empty() && !path.empty() && path.front() != '/') path = base_dir + "/" + path;
    load_topology(c, path);
  }
  auto& groups = c.env.scenario.infrastructure.groups;
  if (j.contains("capacity")) {
    int cap = 0;
    get_if(j, "capacity", cap, where);
    for (auto& g : groups) g.capacity = cap;
  }
  if (j.contains("server_mttr")) {
    double v = 0;
    get_if(j, "server_mttr", v, where);
    for (auto& g : groups) g.mttr = v;
  }
  if (j.contains("cpu_power")) {
    double v = 0;
    get_if(j, "cpu_power", v, where);
    for (auto& g : groups) g.cpu_power = v;
  }
  if (j.contains("mem_power")) {
    double v = 0;
    get_if(j, "mem_power", v, where);
    for (auto& g : groups) g.mem_power = v;
  }
  if (j.contains("servers")) {
    int n = 0;
    get_if(j, "servers", n, where);
    scale_servers(c, n);
  }
  auto& s = c.env.scenario;
  get_if(j, "mode", c.mode, where);
  get_if(j, "vnf_mttf", s.vnf_mttf, where);
  get_if(j, "vnf_mttr", s.vnf_mttr, where);
  get_if(j, "vm_max", s.vm_max, where);
  get_if(j, "customers", s.customers, where);
  get_if(j, "theta", s.theta, where);
  get_if(j, "lambda", s.lambda, where);
  get_if(j, "mu", s.mu, where);
  get_if(j, "sfc_min_length", s.shape.min_length, where);
  get_if(j, "sfc_max_length", s.shape.max_length, where);
  if (j.contains("catalog")) {
    const auto& cat = j["catalog"];
    if (!cat.is_array()) throw ConfigError(where + ": 'catalog' must be an array");
    s.catalog.clear();
    for (const auto& v : cat) {
      detail::check_keys(v, {"name", "demand"}, where + " catalog");
      VnfType t;
      t.id = static_cast<int>(s.catalog.size());
      get_if(v, "name", t.name, where);
      get_if(v, "demand", t.resource_demand, where);
      s.catalog.push_back(t);
    }
  }
  get_if(j, "rho", c.env.rho, where);
  get_if(j, "sigma", c.env.sigma, where);
  get_if(j, "max_retries", c.env.max_retries, where);
  get_if(j, "episode_hours", c.env.episode_hours, where);
  get_if(j, "max_episode_steps", c.env.max_episode_steps, where);
  get_if(j, "agent", c.agent, where);
  if (j.contains("a2c")) {
    const auto& a = j["a2c"];
    const std::string w = where + " a2c";
    detail::check_keys(a, {"lr", "gamma", "n_steps", "value_coef", "entropy_coef", "workers",
                           "max_grad_norm"}, w);
    get_if(a, "lr", c.a2c.lr, w);
    get_if(a, "gamma", c.a2c.gamma, w);
    get_if(a, "n_steps", c.a2c.n_steps, w);
    get_if(a, "value_coef", c.a2c.value_coef, w);
    get_if(a, "entropy_coef", c.a2c.entropy_coef, w);
    get_if(a, "workers", c.a2c.workers, w);
    get_if(a, "max_grad_norm", c.a2c.max_grad_norm, w);
  }
  if (j.contains("ppo")) {
    const auto& p = j["ppo"];
    const std::string w = where + " ppo";
    detail::check_keys(p, {"lr", "gamma", "n_steps", "clip", "epochs", "minibatches",
                           "gae_lambda", "value_coef", "entropy_coef", "workers",
                           "max_grad_norm"}, w);
    get_if(p, "lr", c.ppo.lr, w);
    get_if(p, "gamma", c.ppo.gamma, w);
    get_if(p, "n_steps", c.ppo.n_steps, w);
    get_if(p, "clip", c.ppo.clip, w);
    get_if(p, "epochs", c.ppo.epochs, w);
    get_if(p, "minibatches", c.ppo.minibatches, w);
    get_if(p, "gae_lambda", c.ppo.gae_lambda, w);
    get_if(p, "value_coef", c.ppo.value_coef, w);
    get_if(p, "entropy_coef", c.ppo.entropy_coef, w);
    get_if(p, "workers", c.ppo.workers, w);
    get_if(p, "max_grad_norm", c.ppo.max_grad_norm, w);
  }
  get_if(j, "training_steps", c.training_steps, where);
  get_if(j, "log_interval", c.log_interval, where);
  get_if(j, "eval_hours", c.eval_hours, where);
  get_if(j, "repetitions", c.repetitions, where);
  get_if(j, "seed", c.seed, where);
  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

inline ExperimentConfig config_from_string(const std::string& text,
                                           const std::string& where = "config") {
  return config_from_json(detail::parse_json_text(text, where), where);
}

inline ExperimentConfig load_config(const std::string& path) {
  const std::string text = detail::read_file(path);
  const auto slash = path.find_last_of('/');
  const std::string dir = slash == std::string::npos ? std::string{} : path.substr(0, slash);
  return config_from_json(detail::parse_json_text(text, path), path, dir);
}

}  // namespace sfcrl
