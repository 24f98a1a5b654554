#pragma once

// Seeded discrete-event kernel: SFC arrivals and departures, server
// failure/repair cycles, and VNF instance failure/repair (trace only).

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "sfcrl/core.hpp"
#include "sfcrl/errors.hpp"
#include "sfcrl/format.hpp"
#include "sfcrl/random.hpp"
#include "sfcrl/rbd.hpp"

namespace sfcrl {

enum class EventKind {
  kSfcArrival,
  kSfcDeparture,
  kServerFailure,
  kServerRepair,
  kVnfFailure,
  kVnfRepair,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kSfcArrival: return "sfc_arrival";
    case EventKind::kSfcDeparture: return "sfc_departure";
    case EventKind::kServerFailure: return "server_failure";
    case EventKind::kServerRepair: return "server_repair";
    case EventKind::kVnfFailure: return "vnf_failure";
    case EventKind::kVnfRepair: return "vnf_repair";
  }
  return "unknown";
}

struct Event {
  double time = 0.0;
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::kSfcArrival;
  std::int64_t target = 0;  // customer, request, server or instance id
};

class EventQueue {
 public:
  void push(double time, EventKind kind, std::int64_t target) {
    heap_.push(Event{time, next_sequence_++, kind, target});
  }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  const Event& top() const { return heap_.top(); }
  Event pop() {
    Event e = heap_.top();
    heap_.pop();
    return e;
  }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.sequence > b.sequence;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_sequence_ = 0;
};

// Everything that defines one simulated world, independent of the agent.
struct ScenarioParams {
  InfrastructureConfig infrastructure;
  std::vector<VnfType> catalog = default_catalog();
  SfcShape shape;
  int vm_max = 4;
  int customers = 5;
  double lambda = 0.04;
  double mu = 1000.0;
  double theta = 0.999;
  double vnf_mttf = 2880.0;
  double vnf_mttr = 0.17;

  double vnf_availability() const {
    return rbd::steady_state_availability(vnf_mttf, vnf_mttr);
  }
};

struct SimulationReport {
  double clock = 0.0;
  std::int64_t requests = 0;
  std::int64_t placed = 0;
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  double energy_total = 0.0;
  std::int64_t two_server_placed = 0;
  double two_server_energy_total = 0.0;
  std::int64_t server_failures = 0;
  std::int64_t vnf_failures = 0;

  std::optional<double> acceptance_rate() const {
    if (requests == 0) return std::nullopt;
    return static_cast<double>(accepted) / static_cast<double>(requests);
  }
  std::optional<double> mean_energy() const {
    if (placed == 0) return std::nullopt;
    return energy_total / static_cast<double>(placed);
  }
  bool operator==(const SimulationReport&) const = default;
};

struct CommitResult {
  double availability = 0.0;
  double energy = 0.0;
  bool accepted = false;
};

class SimState;

// Places a request by allocating on the state's servers. Returns the
// placement when every VNF was allocated; on rejection it must leave the
// servers as it found them.
using Placer =
    std::function<std::optional<Placement>(const SfcRequest&, SimState&)>;

class SimState {
 public:
  // Stream ids inside one seed.
  enum Stream : std::uint64_t {
    kCustomerStream = 0,
    kArrivalStream = 1,
    kServerStream = 2,
    kVnfStream = 3,
    kPlacerStream = 4,
  };

  SimState(ScenarioParams params, std::uint64_t seed)
      : params_(std::move(params)),
        seed_(seed),
        arrivals_rng_(seed, kArrivalStream),
        server_rng_(seed, kServerStream),
        vnf_rng_(seed, kVnfStream),
        placer_rng_(seed, kPlacerStream) {
    if (params_.vm_max < 1) throw ConfigError("vm_max must be >= 1");
    if (params_.catalog.empty()) throw ConfigError("empty VNF catalog");
    for (const auto& v : params_.catalog) {
      if (v.resource_demand < 1) throw ConfigError("VNF demand must be >= 1");
    }
    if (params_.shape.min_length < 1 ||
        params_.shape.max_length < params_.shape.min_length) {
      throw ConfigError("invalid SFC length range");
    }
    servers_ = build_infrastructure(params_.infrastructure);
    RngStream customer_rng(seed, kCustomerStream);
    customers_ = generate_customers(params_.customers, params_.lambda,
                                    params_.mu, params_.theta, customer_rng);
    vnf_availability_ = params_.vnf_availability();
  }

  const ScenarioParams& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }
  double clock() const { return clock_; }
  const std::vector<ServerRuntime>& servers() const { return servers_; }
  std::vector<ServerRuntime>& servers() { return servers_; }
  const std::vector<Customer>& customers() const { return customers_; }
  const EventQueue& queue() const { return queue_; }
  double vnf_availability() const { return vnf_availability_; }
  RngStream& placer_rng() { return placer_rng_; }
  const std::map<RequestId, Placement>& active_placements() const {
    return active_;
  }
  const SimulationReport& report() const { return report_; }

  void set_trace(std::ostream* trace) {
    trace_ = trace;
    if (trace_) *trace_ << "time,kind,id\n";
  }

  void schedule_initial_events() {
    if (clock_ != 0.0 || initialized_) {
      throw UsageError("initial events must be scheduled at clock 0");
    }
    initialized_ = true;
    for (const auto& c : customers_) {
      queue_.push(sample_exponential(c.arrival_rate, arrivals_rng_),
                  EventKind::kSfcArrival, static_cast<std::int64_t>(c.id));
    }
    for (const auto& s : servers_) {
      queue_.push(sample_exponential(1.0 / s.spec().mttf, server_rng_),
                  EventKind::kServerFailure,
                  static_cast<std::int64_t>(s.spec().id));
    }
  }

  // Pops and processes one event; arrivals go through `placer`.
  void handle_event(const Event& event, const Placer& placer) {
    if (event.kind == EventKind::kSfcArrival) {
      SfcRequest request = on_arrival(event);
      std::optional<Placement> placement = placer(request, *this);
      if (placement && placement->complete) {
        commit(request, std::move(*placement));
      } else {
        reject(request);
      }
    } else {
      handle_non_arrival(event);
    }
    audit(servers_);
  }

  SimulationReport run_until(double t_end, const Placer& placer) {
    if (t_end < clock_) throw UsageError("run_until: horizon before clock");
    while (!queue_.empty() && queue_.top().time <= t_end) {
      handle_event(queue_.pop(), placer);
    }
    clock_ = t_end;
    report_.clock = clock_;
    return report_;
  }

  // Processes background events up to the next arrival within `t_end` and
  // returns its request; the caller must then commit() or reject() it.
  std::optional<SfcRequest> advance_to_next_arrival(double t_end) {
    while (!queue_.empty() && queue_.top().time <= t_end) {
      Event e = queue_.pop();
      if (e.kind == EventKind::kSfcArrival) return on_arrival(e);
      handle_non_arrival(e);
      audit(servers_);
    }
    if (t_end > clock_) clock_ = t_end;
    report_.clock = clock_;
    return std::nullopt;
  }

  CommitResult commit(const SfcRequest& request, Placement placement) {
    placement.request = request.id;
    placement.complete = true;
    if (placement.assignments.size() != request.vnf_sequence.size()) {
      throw UsageError("commit: placement does not cover the chain");
    }
    CommitResult out;
    out.availability =
        rbd::sfc_availability(placement, servers_, vnf_availability_);
    const auto used = placement.distinct_servers();
    for (ServerId s : used) out.energy += servers_[s].spec().power();
    out.accepted = out.availability >= request.theta;

    ++report_.placed;
    if (out.accepted) ++report_.accepted;
    report_.energy_total += out.energy;
    if (used.size() == 2) {
      ++report_.two_server_placed;
      report_.two_server_energy_total += out.energy;
    }

    ActiveSfc active;
    for (const auto& a : placement.assignments) {
      for (int q = 0; q < a.redundancy; ++q) {
        const std::int64_t instance = next_instance_++;
        instances_.emplace(instance, VnfInstance{request.id, true, false});
        active.instances.push_back(instance);
        queue_.push(clock_ + sample_exponential(1.0 / params_.vnf_mttf,
                                                vnf_rng_),
                    EventKind::kVnfFailure, instance);
      }
    }
    active_.emplace(request.id, std::move(placement));
    active_instances_.emplace(request.id, std::move(active));
    queue_.push(clock_ + request.lifetime, EventKind::kSfcDeparture,
                request.id);
    return out;
  }

  void reject(const SfcRequest& request) {
    deallocate(request.id, servers_);
    ++report_.rejected;
  }

 private:
  struct VnfInstance {
    RequestId request = 0;
    bool up = true;
    bool retired = false;
  };
  struct ActiveSfc {
    std::vector<std::int64_t> instances;
  };

  void advance_clock(const Event& e) {
    if (e.time < clock_) throw InternalError("event earlier than clock");
    clock_ = e.time;
    report_.clock = clock_;
    if (trace_) {
      *trace_ << format_double(e.time) << ',' << to_string(e.kind) << ','
              << e.target << '\n';
    }
  }

  SfcRequest on_arrival(const Event& e) {
    advance_clock(e);
    if (e.target < 0 ||
        static_cast<std::size_t>(e.target) >= customers_.size()) {
      throw InternalError("arrival for unknown customer");
    }
    const Customer& c = customers_[static_cast<std::size_t>(e.target)];
    SfcRequest r = generate_request(c, clock_, params_.catalog, arrivals_rng_,
                                    next_request_++, params_.shape);
    queue_.push(clock_ + sample_exponential(c.arrival_rate, arrivals_rng_),
                EventKind::kSfcArrival, e.target);
    ++report_.requests;
    return r;
  }

  ServerRuntime& server_at(std::int64_t id) {
    if (id < 0 || static_cast<std::size_t>(id) >= servers_.size()) {
      throw InternalError("event for unknown server");
    }
    return servers_[static_cast<std::size_t>(id)];
  }

  void handle_non_arrival(const Event& e) {
    advance_clock(e);
    switch (e.kind) {
      case EventKind::kSfcDeparture: {
        auto it = active_.find(e.target);
        if (it == active_.end()) {
          throw InternalError("departure for unknown request");
        }
        deallocate(e.target, servers_);
        active_.erase(it);
        auto inst = active_instances_.find(e.target);
        if (inst != active_instances_.end()) {
          for (auto id : inst->second.instances) {
            instances_.at(id).retired = true;
          }
          active_instances_.erase(inst);
        }
        break;
      }
      case EventKind::kServerFailure: {
        ServerRuntime& s = server_at(e.target);
        if (!s.operational()) throw InternalError("server failed twice");
        s.set_operational(false);
        ++report_.server_failures;
        queue_.push(clock_ + sample_exponential(1.0 / s.spec().mttr,
                                                server_rng_),
                    EventKind::kServerRepair, e.target);
        break;
      }
      case EventKind::kServerRepair: {
        ServerRuntime& s = server_at(e.target);
        if (s.operational()) throw InternalError("repair of a live server");
        s.set_operational(true);
        queue_.push(clock_ + sample_exponential(1.0 / s.spec().mttf,
                                                server_rng_),
                    EventKind::kServerFailure, e.target);
        break;
      }
      case EventKind::kVnfFailure:
      case EventKind::kVnfRepair: {
        auto it = instances_.find(e.target);
        if (it == instances_.end()) {
          throw InternalError("event for unknown VNF instance");
        }
        VnfInstance& inst = it->second;
        if (inst.retired) break;  // instance departed with its SFC
        const bool failure = e.kind == EventKind::kVnfFailure;
        if (inst.up != failure) throw InternalError("VNF toggled twice");
        inst.up = !failure;
        if (failure) ++report_.vnf_failures;
        const double mean = failure ? params_.vnf_mttr : params_.vnf_mttf;
        queue_.push(clock_ + sample_exponential(1.0 / mean, vnf_rng_),
                    failure ? EventKind::kVnfRepair : EventKind::kVnfFailure,
                    e.target);
        break;
      }
      case EventKind::kSfcArrival:
        throw InternalError("arrival routed to background handler");
    }
  }

  ScenarioParams params_;
  std::uint64_t seed_;
  double clock_ = 0.0;
  bool initialized_ = false;
  EventQueue queue_;
  std::vector<ServerRuntime> servers_;
  std::vector<Customer> customers_;
  double vnf_availability_ = 1.0;
  RngStream arrivals_rng_;
  RngStream server_rng_;
  RngStream vnf_rng_;
  RngStream placer_rng_;
  RequestId next_request_ = 0;
  std::int64_t next_instance_ = 0;
  std::map<RequestId, Placement> active_;
  std::unordered_map<RequestId, ActiveSfc> active_instances_;
  std::unordered_map<std::int64_t, VnfInstance> instances_;
  SimulationReport report_;
  std::ostream* trace_ = nullptr;
};

}  // namespace sfcrl
