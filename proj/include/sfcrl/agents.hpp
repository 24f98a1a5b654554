#pragma once

// A2C and PPO2 training, plus the greedy and random placement baselines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "sfcrl/core.hpp"
#include "sfcrl/env.hpp"
#include "sfcrl/errors.hpp"
#include "sfcrl/nn.hpp"
#include "sfcrl/random.hpp"
#include "sfcrl/sim.hpp"

namespace sfcrl::agents {

struct Trajectory {
  std::vector<std::vector<double>> observations;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;  // episode ended after this step
  std::vector<double> log_probs;
  std::vector<double> values;
  double bootstrap_value = 0.0;

  std::size_t size() const { return actions.size(); }
  bool consistent() const {
    const auto n = actions.size();
    return observations.size() == n && rewards.size() == n &&
           dones.size() == n && log_probs.size() == n && values.size() == n;
  }
};

struct A2cConfig {
  double lr = 0.00005;
  double gamma = 0.99;
  std::size_t n_steps = 5;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  std::size_t workers = 1;
  double max_grad_norm = 0.5;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("a2c: gamma outside [0,1]");
    if (!(lr > 0.0)) throw ConfigError("a2c: lr must be positive");
    if (n_steps < 1 || workers < 1) throw ConfigError("a2c: n_steps and workers must be >= 1");
  }
};

struct PpoConfig {
  double lr = 0.00005;
  double gamma = 0.85;
  std::size_t n_steps = 128;
  double clip = 0.2;
  std::size_t epochs = 4;
  std::size_t minibatches = 4;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  std::size_t workers = 1;
  double max_grad_norm = 0.5;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("ppo: gamma outside [0,1]");
    if (!(clip > 0.0)) throw ConfigError("ppo: clip must be positive");
    if (!(lr > 0.0)) throw ConfigError("ppo: lr must be positive");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo: gae_lambda outside [0,1]");
    if (n_steps < 1 || epochs < 1 || minibatches < 1 || workers < 1) {
      throw ConfigError("ppo: step/epoch/minibatch/worker counts must be >= 1");
    }
    if (minibatches > n_steps * workers) {
      throw ConfigError("ppo: more minibatches than samples");
    }
  }
};

struct EpisodeRecord {
  std::int64_t end_step = 0;  // global step count when the episode ended
  double reward = 0.0;
  EpisodeStats stats;
};

// One environment plus the bookkeeping needed to auto-reset it.
class Worker {
 public:
  Worker(const EnvConfig& config, std::uint64_t seed, std::uint64_t index)
      : env_(config),
        seed_(seed),
        index_(index),
        rng_(derive_seed(seed, index, 0xac7), 0) {
    obs_ = env_.reset(episode_seed());
  }

  SfcEnv& env() { return env_; }
  const std::vector<double>& observation() const { return obs_; }
  RngStream& rng() { return rng_; }
  std::vector<EpisodeRecord>& finished() { return finished_; }

  // Applies an action; on episode end records it and resets.
  StepOutcome act(std::size_t action, std::int64_t global_step) {
    StepOutcome out = env_.step(ActionIndex{action});
    episode_reward_ += out.reward;
    if (out.done) {
      finished_.push_back({global_step, episode_reward_, env_.episode_metrics()});
      episode_reward_ = 0.0;
      ++episode_;
      obs_ = env_.reset(episode_seed());
    } else {
      obs_ = out.observation;
    }
    return out;
  }

 private:
  std::uint64_t episode_seed() const { return derive_seed(seed_, index_, episode_ + 1); }

  SfcEnv env_;
  std::uint64_t seed_;
  std::uint64_t index_;
  std::uint64_t episode_ = 0;
  RngStream rng_;
  std::vector<double> obs_;
  double episode_reward_ = 0.0;
  std::vector<EpisodeRecord> finished_;
};

// Samples n_steps actions from the current policy.
inline Trajectory collect_rollout(Worker& worker, const nn::Mlp& net,
                                  std::size_t n_steps,
                                  std::int64_t* global_step = nullptr) {
  Trajectory t;
  for (std::size_t i = 0; i < n_steps; ++i) {
    const auto& obs = worker.observation();
    auto out = net.forward(obs);
    nn::CategoricalDistribution dist(out.logits);
    const std::size_t a = dist.sample(worker.rng());
    t.observations.push_back(obs);
    t.actions.push_back(a);
    t.log_probs.push_back(dist.log_prob(a));
    t.values.push_back(out.value);
    const std::int64_t step = global_step ? ++*global_step : 0;
    StepOutcome r = worker.act(a, step);
    t.rewards.push_back(r.reward);
    t.dones.push_back(r.done ? 1 : 0);
  }
  t.bootstrap_value = net.forward(worker.observation()).value;
  return t;
}

struct Advantages {
  std::vector<double> returns;
  std::vector<double> advantages;
};

// Without gae_lambda: n-step bootstrapped returns, advantage = return - V.
// With gae_lambda: GAE recursion, returns = advantages + V.
inline Advantages compute_advantages(const Trajectory& traj, double gamma,
                                     std::optional<double> gae_lambda) {
  if (!traj.consistent()) throw UsageError("trajectory arrays differ in length");
  const std::size_t n = traj.size();
  Advantages out;
  out.returns.resize(n);
  out.advantages.resize(n);
  if (!gae_lambda) {
    double ret = traj.bootstrap_value;
    for (std::size_t i = n; i-- > 0;) {
      ret = traj.rewards[i] + gamma * ret * (traj.dones[i] ? 0.0 : 1.0);
      out.advantages[i] = ret - traj.values[i];
      out.returns[i] = out.advantages[i] + traj.values[i];
    }
    return out;
  }
  const double lambda = *gae_lambda;
  double last = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double nonterminal = traj.dones[i] ? 0.0 : 1.0;
    const double next_value = i + 1 < n ? traj.values[i + 1] : traj.bootstrap_value;
    const double delta = traj.rewards[i] + gamma * next_value * nonterminal - traj.values[i];
    last = delta + gamma * lambda * nonterminal * last;
    out.advantages[i] = last;
    out.returns[i] = last + traj.values[i];
  }
  return out;
}

inline double ppo_ratio(double new_log_prob, double old_log_prob) {
  return std::exp(new_log_prob - old_log_prob);
}

// Per-sample clipped surrogate objective (to be maximised).
inline double ppo_clip_loss(double ratio, double advantage, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("clip range must be positive");
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

struct Sample {
  std::span<const double> observation;
  std::size_t action = 0;
  double advantage = 0.0;
  double ret = 0.0;
  double old_log_prob = 0.0;
};

// Composite loss: policy term + value_coef * (V - R)^2 - entropy_coef * H,
// averaged over samples. A2C uses -log pi * A; PPO the negative clipped
// surrogate.
struct LossSpec {
  enum class Policy { kA2c, kPpo } policy = Policy::kA2c;
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
};

struct LossReport {
  double total = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
};

// Mean loss over `samples`; adds its gradient into `grad` when non-empty.
inline LossReport composite_loss(const nn::Mlp& net, std::span<const Sample> samples,
                                 const LossSpec& spec, std::span<double> grad = {}) {
  LossReport rep;
  if (samples.empty()) return rep;
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  std::vector<double> dlogits(net.shape().actions);
  for (const auto& s : samples) {
    nn::ForwardPass pass = net.forward_pass(s.observation);
    nn::CategoricalDistribution dist(pass.logits);
    const double lp = dist.log_prob(s.action);
    const double h = dist.entropy();
    double policy = 0.0;
    double policy_scale = 0.0;  // coefficient on d(log p_a)/d(logits)
    if (spec.policy == LossSpec::Policy::kA2c) {
      policy = -lp * s.advantage;
      policy_scale = -s.advantage;
    } else {
      const double r = ppo_ratio(lp, s.old_log_prob);
      const double unclipped = r * s.advantage;
      const double obj = ppo_clip_loss(r, s.advantage, spec.clip);
      policy = -obj;
      // The clipped branch is constant in the parameters.
      if (unclipped <= obj) policy_scale = -s.advantage * r;
      if (std::abs(r - 1.0) > spec.clip) rep.clip_fraction += inv_n;
      rep.approx_kl += inv_n * (s.old_log_prob - lp);
    }
    const double verr = pass.value - s.ret;
    rep.policy_loss += inv_n * policy;
    rep.value_loss += inv_n * verr * verr;
    rep.entropy += inv_n * h;
    if (!grad.empty()) {
      std::fill(dlogits.begin(), dlogits.end(), 0.0);
      nn::add_log_prob_grad(dist, s.action, policy_scale * inv_n, dlogits);
      nn::add_entropy_grad(dist, -spec.entropy_coef * inv_n, dlogits);
      const double dvalue = 2.0 * spec.value_coef * verr * inv_n;
      net.backward(pass, dlogits, dvalue, grad);
    }
  }
  rep.total = rep.policy_loss + spec.value_coef * rep.value_loss - spec.entropy_coef * rep.entropy;
  return rep;
}

// One synchronous A2C step over the workers' trajectories. Per-worker
// gradients are summed by the caller-side coordinator into one update.
inline LossReport a2c_update(nn::Mlp& net, nn::Optimizer& opt,
                             std::span<const Trajectory> trajs, const A2cConfig& cfg) {
  std::vector<Sample> samples;
  std::vector<Advantages> advs;
  advs.reserve(trajs.size());
  for (const auto& t : trajs) advs.push_back(compute_advantages(t, cfg.gamma, std::nullopt));
  for (std::size_t w = 0; w < trajs.size(); ++w) {
    for (std::size_t i = 0; i < trajs[w].size(); ++i) {
      samples.push_back({trajs[w].observations[i], trajs[w].actions[i],
                         advs[w].advantages[i], advs[w].returns[i], trajs[w].log_probs[i]});
    }
  }
  LossSpec spec{LossSpec::Policy::kA2c, 0.0, cfg.value_coef, cfg.entropy_coef};
  std::vector<double> grad(net.param_count(), 0.0);
  LossReport rep = composite_loss(net, samples, spec, grad);
  rep.grad_norm = nn::clip_grad_norm(grad, cfg.max_grad_norm);
  opt.step(net.params(), grad, cfg.lr);
  return rep;
}

inline void normalize(std::span<double> v) {
  if (v.empty()) return;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(v.size()));
  for (double& x : v) x = (x - mean) / (sd + 1e-8);
}

// `epochs` passes over shuffled minibatches of the batch.
inline LossReport ppo_update(nn::Mlp& net, nn::Optimizer& opt,
                             std::span<const Trajectory> trajs, const PpoConfig& cfg,
                             RngStream& rng) {
  struct Item {
    const Trajectory* traj;
    std::size_t index;
    double advantage;
    double ret;
  };
  std::vector<Item> items;
  for (const auto& t : trajs) {
    Advantages a = compute_advantages(t, cfg.gamma, cfg.gae_lambda);
    for (std::size_t i = 0; i < t.size(); ++i) {
      items.push_back({&t, i, a.advantages[i], a.returns[i]});
    }
  }
  const std::size_t n = items.size();
  if (n == 0) return {};
  const std::size_t mb = std::max<std::size_t>(1, n / cfg.minibatches);
  LossSpec spec{LossSpec::Policy::kPpo, cfg.clip, cfg.value_coef, cfg.entropy_coef};
  std::vector<std::size_t> order(n);
  LossReport sum;
  std::size_t updates = 0;
  std::vector<double> grad(net.param_count());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start + mb <= n; start += mb) {
      std::vector<double> adv(mb);
      for (std::size_t k = 0; k < mb; ++k) adv[k] = items[order[start + k]].advantage;
      normalize(adv);
      std::vector<Sample> batch;
      batch.reserve(mb);
      for (std::size_t k = 0; k < mb; ++k) {
        const Item& it = items[order[start + k]];
        batch.push_back({it.traj->observations[it.index], it.traj->actions[it.index], adv[k],
                         it.ret, it.traj->log_probs[it.index]});
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      LossReport rep = composite_loss(net, batch, spec, grad);
      rep.grad_norm = nn::clip_grad_norm(grad, cfg.max_grad_norm);
      opt.step(net.params(), grad, cfg.lr);
      sum.total += rep.total;
      sum.policy_loss += rep.policy_loss;
      sum.value_loss += rep.value_loss;
      sum.entropy += rep.entropy;
      sum.approx_kl += rep.approx_kl;
      sum.clip_fraction += rep.clip_fraction;
      sum.grad_norm += rep.grad_norm;
      ++updates;
    }
  }
  const double inv = 1.0 / static_cast<double>(updates);
  sum.total *= inv;
  sum.policy_loss *= inv;
  sum.value_loss *= inv;
  sum.entropy *= inv;
  sum.approx_kl *= inv;
  sum.clip_fraction *= inv;
  sum.grad_norm *= inv;
  return sum;
}

// Mean probability ratio of the stored actions under the current network.
inline double mean_ratio(const nn::Mlp& net, std::span<const Trajectory> trajs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : trajs) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      nn::CategoricalDistribution d(net.forward(t.observations[i]).logits);
      sum += ppo_ratio(d.log_prob(t.actions[i]), t.log_probs[i]);
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 1.0;
}

// ---------------------------------------------------------------- baselines

namespace detail {
// Allocates `vnf` on `server`, redrawing Q below what fits when the first
// draw overflows. False when not even Q = 1 fits.
inline bool place_with_redraw(ServerRuntime& server, const VnfType& vnf, RequestId id,
                              int vm_max, RngStream& rng, Assignment& out) {
  const int free = server.free_resources();
  if (free < vnf.resource_demand) return false;
  int q = static_cast<int>(rng.uniform_int(1, vm_max));
  if (q * vnf.resource_demand > free) {
    const int cap = std::min(vm_max, free / vnf.resource_demand);
    q = static_cast<int>(rng.uniform_int(1, cap));
  }
  if (!allocate(server, vnf, q, id, vm_max)) return false;
  out = {server.spec().id, q};
  return true;
}
}  // namespace detail

// Each VNF goes to the server with the most free units (lowest id on
// ties) with Q ~ U{1..vm_max}.
inline std::optional<Placement> greedy_place(const SfcRequest& request,
                                             std::vector<ServerRuntime>& servers, int vm_max,
                                             RngStream& rng) {
  Placement p;
  p.request = request.id;
  for (const auto& vnf : request.vnf_sequence) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < servers.size(); ++i) {
      if (!servers[i].operational()) continue;
      if (!best || servers[i].free_resources() > servers[*best].free_resources()) best = i;
    }
    Assignment a;
    if (!best || !detail::place_with_redraw(servers[*best], vnf, request.id, vm_max, rng, a)) {
      deallocate(request.id, servers);
      return std::nullopt;
    }
    p.assignments.push_back(a);
  }
  p.complete = true;
  return p;
}

inline std::optional<Placement> random_place(const SfcRequest& request,
                                             std::vector<ServerRuntime>& servers, int vm_max,
                                             RngStream& rng) {
  Placement p;
  p.request = request.id;
  for (const auto& vnf : request.vnf_sequence) {
    Assignment a;
    bool ok = !servers.empty();
    if (ok) {
      const auto s = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(servers.size()) - 1));
      ok = detail::place_with_redraw(servers[s], vnf, request.id, vm_max, rng, a);
    }
    if (!ok) {
      deallocate(request.id, servers);
      return std::nullopt;
    }
    p.assignments.push_back(a);
  }
  p.complete = true;
  return p;
}

inline Placer greedy_placer() {
  return [](const SfcRequest& r, SimState& s) {
    return greedy_place(r, s.servers(), s.params().vm_max, s.placer_rng());
  };
}

inline Placer random_placer() {
  return [](const SfcRequest& r, SimState& s) {
    return random_place(r, s.servers(), s.params().vm_max, s.placer_rng());
  };
}

// Runs one seeded horizon with a non-learning placer.
inline SimulationReport run_baseline(const Placer& placer, const ScenarioParams& scenario,
                                     std::uint64_t seed, double horizon) {
  SimState sim(scenario, seed);
  sim.schedule_initial_events();
  return sim.run_until(horizon, placer);
}

// Deterministic (argmax) rollout of a trained policy over `horizon` hours.
inline EpisodeStats evaluate_policy(const nn::Mlp& net, EnvConfig config, std::uint64_t seed,
                                    double horizon) {
  config.episode_hours = horizon;
  config.max_episode_steps = 0;
  SfcEnv env(std::move(config));
  auto obs = env.reset(seed);
  while (!env.done()) {
    nn::CategoricalDistribution d(net.forward(obs).logits);
    obs = env.step(ActionIndex{d.argmax()}).observation;
  }
  return env.episode_metrics();
}

// ----------------------------------------------------------------- training

struct CurvePoint {
  std::int64_t step = 0;
  double cumulative_reward = 0.0;
  std::optional<double> episode_reward_mean;  // last <= 10 finished episodes
  double entropy = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

struct TrainingResult {
  nn::Mlp net;
  std::vector<CurvePoint> curve;
  std::vector<EpisodeRecord> episodes;  // ordered by end_step
};

struct TrainOptions {
  std::int64_t total_steps = 0;
  std::uint64_t seed = 0;
  std::int64_t log_interval = 1000;
};

namespace detail {

template <typename Update>
TrainingResult train_loop(const EnvConfig& env_config, std::size_t workers_n,
                          std::size_t n_steps, nn::Optimizer opt, const TrainOptions& opts,
                          Update update) {
  std::vector<Worker> workers;
  for (std::size_t w = 0; w < workers_n; ++w) workers.emplace_back(env_config, opts.seed, w);
  RngStream init_rng(derive_seed(opts.seed, 0x1417), 0);
  nn::MlpShape shape;
  shape.input = workers.front().env().observation_size();
  shape.actions = workers.front().env().action_count();
  TrainingResult result;
  result.net = nn::Mlp::initialized(shape, init_rng);

  std::int64_t step = 0;
  double cumulative = 0.0;
  std::int64_t next_log = opts.log_interval > 0 ? opts.log_interval : INT64_MAX;
  while (step < opts.total_steps) {
    std::vector<Trajectory> trajs;
    for (auto& w : workers) {
      const std::size_t before = w.finished().size();
      trajs.push_back(collect_rollout(w, result.net, n_steps, &step));
      for (std::size_t k = before; k < w.finished().size(); ++k) {
        result.episodes.push_back(w.finished()[k]);
      }
      for (double r : trajs.back().rewards) cumulative += r;
    }
    LossReport rep = update(result.net, opt, trajs);
    while (step >= next_log) {
      CurvePoint pt;
      pt.step = next_log;
      pt.cumulative_reward = cumulative;
      const std::size_t m = std::min<std::size_t>(10, result.episodes.size());
      if (m > 0) {
        double s = 0.0;
        for (std::size_t k = result.episodes.size() - m; k < result.episodes.size(); ++k) {
          s += result.episodes[k].reward;
        }
        pt.episode_reward_mean = s / static_cast<double>(m);
      }
      pt.entropy = rep.entropy;
      pt.policy_loss = rep.policy_loss;
      pt.value_loss = rep.value_loss;
      result.curve.push_back(pt);
      next_log += opts.log_interval;
    }
  }
  std::stable_sort(result.episodes.begin(), result.episodes.end(),
                   [](const EpisodeRecord& a, const EpisodeRecord& b) {
                     return a.end_step < b.end_step;
                   });
  return result;
}

}  // namespace detail

inline TrainingResult train_a2c(const EnvConfig& env_config, const A2cConfig& cfg,
                                const TrainOptions& opts) {
  cfg.validate();
  SfcEnv probe(env_config);
  auto opt = nn::Optimizer::rmsprop(nn::MlpShape{probe.observation_size(), {64, 64},
                                                 probe.action_count()}
                                        .param_count());
  return detail::train_loop(env_config, cfg.workers, cfg.n_steps, std::move(opt), opts,
                            [&](nn::Mlp& net, nn::Optimizer& o, const std::vector<Trajectory>& t) {
                              return a2c_update(net, o, t, cfg);
                            });
}

inline TrainingResult train_ppo(const EnvConfig& env_config, const PpoConfig& cfg,
                                const TrainOptions& opts) {
  cfg.validate();
  SfcEnv probe(env_config);
  auto opt = nn::Optimizer::adam(nn::MlpShape{probe.observation_size(), {64, 64},
                                              probe.action_count()}
                                     .param_count());
  RngStream shuffle_rng(derive_seed(opts.seed, 0x5b0f), 0);
  return detail::train_loop(env_config, cfg.workers, cfg.n_steps, std::move(opt), opts,
                            [&](nn::Mlp& net, nn::Optimizer& o, const std::vector<Trajectory>& t) {
                              return ppo_update(net, o, t, cfg, shuffle_rng);
                            });
}

}  // namespace sfcrl::agents
