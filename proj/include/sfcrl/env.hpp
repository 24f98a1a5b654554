#pragma once

// Episodic MDP over the simulator. Each arriving SFC is placed one VNF per
// step; the action picks a server and a redundancy count.

#include <cstdint>
#include <optional>
#include <vector>

#include "sfcrl/core.hpp"
#include "sfcrl/errors.hpp"
#include "sfcrl/rbd.hpp"
#include "sfcrl/sim.hpp"

namespace sfcrl {

struct EnvConfig {
  ScenarioParams scenario;
  double rho = 1000.0;   // availability-margin scale
  double sigma = 0.005;  // energy scale
  int max_retries = 3;
  double episode_hours = 8760.0;
  std::int64_t max_episode_steps = 0;  // 0: horizon only
};

// Flat action index: server = a / vm_max, redundancy = a % vm_max + 1.
struct ActionIndex {
  std::size_t value = 0;

  static ActionIndex encode(ServerId server, int redundancy, int vm_max) {
    return {server * static_cast<std::size_t>(vm_max) +
            static_cast<std::size_t>(redundancy - 1)};
  }
  ServerId server(int vm_max) const {
    return value / static_cast<std::size_t>(vm_max);
  }
  int redundancy(int vm_max) const {
    return static_cast<int>(value % static_cast<std::size_t>(vm_max)) + 1;
  }
};

struct StepInfo {
  bool sfc_completed = false;
  bool sfc_accepted = false;
  bool sfc_rejected = false;
  std::optional<double> sfc_availability;
  std::optional<double> sfc_energy;
};

struct StepOutcome {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct EpisodeStats {
  std::int64_t requests = 0;
  std::int64_t placed = 0;
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::optional<double> acceptance_rate;
  std::optional<double> mean_energy;
  double cumulative_reward = 0.0;
  std::int64_t steps = 0;
};

// Layout: [R_1..R_n free/capacity, A_1..A_n, demand/max_demand, theta].
// `current` may be null between requests, which zeroes the demand entry.
inline std::vector<double> encode_state(const SimState& sim,
                                        const VnfType* current,
                                        const Customer& customer) {
  const auto& servers = sim.servers();
  const std::size_t n = servers.size();
  std::vector<double> obs(2 * n + 2, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& spec = servers[i].spec();
    obs[i] = static_cast<double>(servers[i].free_resources()) /
             static_cast<double>(spec.capacity);
    obs[n + i] = rbd::steady_state_availability(spec.mttf, spec.mttr);
  }
  const int top = max_demand(sim.params().catalog);
  obs[2 * n] = current ? static_cast<double>(current->resource_demand) /
                             static_cast<double>(top)
                       : 0.0;
  obs[2 * n + 1] = customer.availability_requirement;
  return obs;
}

class SfcEnv {
 public:
  explicit SfcEnv(EnvConfig config) : config_(std::move(config)) {
    if (config_.max_retries < 1) throw ConfigError("max_retries must be >= 1");
    if (!(config_.episode_hours > 0)) {
      throw ConfigError("episode_hours must be positive");
    }
    // Probe the layout once; also validates the scenario.
    SimState probe(config_.scenario, 0);
    server_count_ = probe.servers().size();
  }

  const EnvConfig& config() const { return config_; }
  std::size_t observation_size() const { return 2 * server_count_ + 2; }
  std::size_t action_count() const {
    return server_count_ * static_cast<std::size_t>(config_.scenario.vm_max);
  }
  bool done() const { return done_; }
  const SimState& sim() const { return *sim_; }
  SimState& mutable_sim() { return *sim_; }
  const std::optional<SfcRequest>& pending_request() const { return pending_; }

  std::vector<double> reset(std::uint64_t seed) {
    sim_.emplace(config_.scenario, seed);
    sim_->schedule_initial_events();
    done_ = false;
    steps_ = 0;
    cumulative_reward_ = 0.0;
    pending_.reset();
    advance();
    return observation();
  }

  // Replaces the request being placed, discarding any partial allocation.
  // Lets callers script specific chains.
  std::vector<double> present_request(SfcRequest request) {
    require_live();
    if (pending_) deallocate(pending_->id, sim_->servers());
    if (request.vnf_sequence.empty()) {
      throw UsageError("present_request: empty chain");
    }
    pending_ = std::move(request);
    start_request();
    done_ = false;
    return observation();
  }

  StepOutcome step(ActionIndex action) {
    require_live();
    if (done_) throw UsageError("step called on a finished episode");
    if (action.value >= action_count()) {
      throw UsageError("action index out of range");
    }
    const int vm_max = config_.scenario.vm_max;
    const ServerId server = action.server(vm_max);
    const int q = action.redundancy(vm_max);
    const SfcRequest& request = *pending_;
    const VnfType& vnf = request.vnf_sequence[position_];

    StepOutcome out;
    auto& servers = sim_->servers();
    if (!allocate(servers[server], vnf, q, request.id, vm_max)) {
      ++retries_;
      if (retries_ >= config_.max_retries) {
        out.reward = -5.0;
        out.info.sfc_rejected = true;
        sim_->reject(request);
        pending_.reset();
        advance();
      } else {
        out.reward = -1.0;
      }
    } else {
      retries_ = 0;
      placement_.assignments.push_back({server, q});
      if (position_ + 1 < request.vnf_sequence.size()) {
        ++position_;
        out.reward = 0.0;
      } else {
        const double theta = request.theta;
        const CommitResult c = sim_->commit(request, placement_);
        out.reward = (c.availability - theta) * config_.rho -
                     c.energy * config_.sigma + 2.0;
        out.info.sfc_completed = true;
        out.info.sfc_accepted = c.accepted;
        out.info.sfc_availability = c.availability;
        out.info.sfc_energy = c.energy;
        pending_.reset();
        advance();
      }
    }
    ++steps_;
    cumulative_reward_ += out.reward;
    if (config_.max_episode_steps > 0 && steps_ >= config_.max_episode_steps &&
        !done_) {
      if (pending_) {
        sim_->reject(*pending_);
        pending_.reset();
      }
      done_ = true;
    }
    out.done = done_;
    out.observation = observation();
    return out;
  }

  EpisodeStats episode_metrics() const {
    require_live();
    const auto& r = sim_->report();
    EpisodeStats s;
    s.requests = r.requests;
    s.placed = r.placed;
    s.accepted = r.accepted;
    s.rejected = r.rejected;
    s.acceptance_rate = r.acceptance_rate();
    s.mean_energy = r.mean_energy();
    s.cumulative_reward = cumulative_reward_;
    s.steps = steps_;
    return s;
  }

  std::vector<double> observation() const {
    require_live();
    const Customer& c =
        sim_->customers()[pending_ ? pending_->customer : 0];
    const VnfType* vnf =
        pending_ ? &pending_->vnf_sequence[position_] : nullptr;
    return encode_state(*sim_, vnf, c);
  }

 private:
  void require_live() const {
    if (!sim_) throw UsageError("environment used before reset");
  }

  void start_request() {
    position_ = 0;
    retries_ = 0;
    placement_ = Placement{};
    placement_.request = pending_->id;
  }

  void advance() {
    auto next = sim_->advance_to_next_arrival(config_.episode_hours);
    if (!next) {
      done_ = true;
      return;
    }
    pending_ = std::move(*next);
    start_request();
  }

  EnvConfig config_;
  std::size_t server_count_ = 0;
  std::optional<SimState> sim_;
  std::optional<SfcRequest> pending_;
  Placement placement_;
  std::size_t position_ = 0;
  int retries_ = 0;
  bool done_ = true;
  std::int64_t steps_ = 0;
  double cumulative_reward_ = 0.0;
};

}  // namespace sfcrl
