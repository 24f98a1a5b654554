#pragma once

// Domain model: VNF catalog, servers, customers, SFC requests, and the
// resource bookkeeping that keeps allocations consistent.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfcrl/errors.hpp"
#include "sfcrl/random.hpp"

namespace sfcrl {

using ServerId = std::size_t;
using RequestId = std::int64_t;

struct VnfType {
  int id = 0;
  std::string name;
  int resource_demand = 1;
};

// WAN-opt needs four units; firewall and IDS one each.
inline std::vector<VnfType> default_catalog() {
  return {{0, "IDS", 1}, {1, "Firewall", 1}, {2, "WAN-opt", 4}};
}

inline int max_demand(const std::vector<VnfType>& catalog) {
  int m = 0;
  for (const auto& v : catalog) m = std::max(m, v.resource_demand);
  return m;
}

struct ServerSpec {
  ServerId id = 0;
  std::string name;
  int group = 1;
  int capacity = 10;
  double mttf = 8760.0;
  double mttr = 1.667;
  double cpu_power = 40.0;
  double mem_power = 30.17;

  double power() const { return cpu_power + mem_power; }
};

struct HostedEntry {
  RequestId request = 0;
  int vnf_type = 0;
  int redundancy = 1;
  int units = 0;  // redundancy * demand at allocation time
};

class ServerRuntime {
 public:
  explicit ServerRuntime(ServerSpec spec) : spec_(std::move(spec)) {}

  const ServerSpec& spec() const { return spec_; }
  int allocated() const { return allocated_; }
  bool operational() const { return operational_; }
  const std::vector<HostedEntry>& hosted() const { return hosted_; }

  void set_operational(bool up) { operational_ = up; }

  // Free units visible to placement; a down server exposes none.
  int free_resources() const {
    return operational_ ? spec_.capacity - allocated_ : 0;
  }

  bool allocate(const VnfType& vnf, int q, RequestId request) {
    if (q < 1) throw UsageError("allocate: redundancy must be >= 1");
    const int units = q * vnf.resource_demand;
    if (!operational_ || units > free_resources()) return false;
    allocated_ += units;
    hosted_.push_back({request, vnf.id, q, units});
    return true;
  }

  // Removes every entry of the request; returns the units released.
  int release(RequestId request) {
    int released = 0;
    auto it = std::remove_if(hosted_.begin(), hosted_.end(),
                             [&](const HostedEntry& e) {
                               if (e.request != request) return false;
                               released += e.units;
                               return true;
                             });
    hosted_.erase(it, hosted_.end());
    allocated_ -= released;
    return released;
  }

  bool consistent() const {
    int sum = 0;
    for (const auto& e : hosted_) sum += e.units;
    return sum == allocated_ && allocated_ >= 0 &&
           allocated_ <= spec_.capacity;
  }

 private:
  ServerSpec spec_;
  int allocated_ = 0;
  bool operational_ = true;
  std::vector<HostedEntry> hosted_;
};

inline int free_resources(const ServerRuntime& server) {
  return server.free_resources();
}

inline bool allocate(ServerRuntime& server, const VnfType& vnf, int q,
                     RequestId request_id, int vm_max) {
  if (q < 1 || q > vm_max) {
    throw UsageError("allocate: redundancy outside [1, vm_max]");
  }
  return server.allocate(vnf, q, request_id);
}

inline void deallocate(RequestId request_id,
                       std::vector<ServerRuntime>& servers) {
  for (auto& s : servers) s.release(request_id);
}

// Throws InternalError naming the first inconsistent server.
inline void audit(const std::vector<ServerRuntime>& servers) {
  for (const auto& s : servers) {
    if (!s.consistent()) {
      throw InternalError("capacity audit failed on server " +
                          std::to_string(s.spec().id));
    }
  }
}

struct Customer {
  std::size_t id = 0;
  double arrival_rate = 0.04;     // requests per hour
  double mean_lifetime = 1000.0;  // hours
  double availability_requirement = 0.999;
};

struct SfcRequest {
  RequestId id = 0;
  std::size_t customer = 0;
  double theta = 0.999;
  std::vector<VnfType> vnf_sequence;
  double arrival_time = 0.0;
  double lifetime = 0.0;
};

struct Assignment {
  ServerId server = 0;
  int redundancy = 1;
};

struct Placement {
  RequestId request = 0;
  std::vector<Assignment> assignments;
  bool complete = false;

  std::vector<ServerId> distinct_servers() const {
    std::vector<ServerId> out;
    for (const auto& a : assignments) {
      if (std::find(out.begin(), out.end(), a.server) == out.end()) {
        out.push_back(a.server);
      }
    }
    return out;
  }
};

// Parameters of one server group (servers sharing reliability and size).
struct ServerGroup {
  int label = 1;
  int count = 28;
  int capacity = 10;
  double mttf = 8760.0;
  double mttr = 1.667;
  double cpu_power = 40.0;
  double mem_power = 30.17;
};

struct InfrastructureConfig {
  std::vector<ServerGroup> groups{ServerGroup{}};
  // Optional per-server names and group labels (topology file). When
  // non-empty it overrides the group counts.
  std::vector<std::pair<std::string, int>> named_servers;
};

inline std::vector<ServerRuntime> build_infrastructure(
    const InfrastructureConfig& config) {
  auto find_group = [&](int label) -> const ServerGroup& {
    for (const auto& g : config.groups) {
      if (g.label == label) return g;
    }
    throw ConfigError("unknown server group " + std::to_string(label));
  };
  auto check = [](const ServerGroup& g) {
    if (g.capacity < 1 || !(g.mttf > 0) || !(g.mttr > 0) ||
        g.cpu_power < 0 || g.mem_power < 0) {
      throw ConfigError("invalid parameters for server group " +
                        std::to_string(g.label));
    }
  };
  std::vector<ServerRuntime> servers;
  auto push = [&](const ServerGroup& g, std::string name) {
    check(g);
    ServerSpec spec{servers.size(), std::move(name), g.label, g.capacity,
                    g.mttf,         g.mttr,          g.cpu_power, g.mem_power};
    servers.emplace_back(std::move(spec));
  };
  if (!config.named_servers.empty()) {
    for (const auto& [name, label] : config.named_servers) {
      push(find_group(label), name);
    }
  } else {
    for (const auto& g : config.groups) {
      if (g.count < 0) throw ConfigError("negative server count");
      for (int i = 0; i < g.count; ++i) {
        push(g, "s" + std::to_string(servers.size()));
      }
    }
  }
  if (servers.empty()) throw ConfigError("infrastructure has no servers");
  return servers;
}

inline std::vector<Customer> generate_customers(int n, double base_lambda,
                                                double base_mu, double theta,
                                                RngStream& rng) {
  if (n < 1) throw ConfigError("need at least one customer");
  if (!(base_lambda > 0) || !(base_mu > 0)) {
    throw DomainError("customer base rates must be positive");
  }
  std::vector<Customer> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Customer c;
    c.id = static_cast<std::size_t>(i);
    c.arrival_rate = rng.uniform(0.9 * base_lambda, 1.1 * base_lambda);
    c.mean_lifetime = rng.uniform(0.9 * base_mu, 1.1 * base_mu);
    c.availability_requirement = theta;
    out.push_back(c);
  }
  return out;
}

struct SfcShape {
  int min_length = 2;
  int max_length = 3;
};

inline SfcRequest generate_request(const Customer& customer, double now,
                                   const std::vector<VnfType>& catalog,
                                   RngStream& rng, RequestId id,
                                   SfcShape shape = {}) {
  if (catalog.empty()) throw UsageError("generate_request: empty catalog");
  SfcRequest r;
  r.id = id;
  r.customer = customer.id;
  r.theta = customer.availability_requirement;
  r.arrival_time = now;
  const auto len = rng.uniform_int(shape.min_length, shape.max_length);
  for (std::int64_t i = 0; i < len; ++i) {
    const auto k = rng.uniform_int(0, static_cast<std::int64_t>(catalog.size()) - 1);
    r.vnf_sequence.push_back(catalog[static_cast<std::size_t>(k)]);
  }
  r.lifetime = sample_exponential(1.0 / customer.mean_lifetime, rng);
  return r;
}

}  // namespace sfcrl
