#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "sfcrl/agents.hpp"
#include "sfcrl/sim.hpp"

using namespace sfcrl;

namespace {

ScenarioParams small_scenario(int servers = 4, int customers = 2) {
  ScenarioParams p;
  p.infrastructure.groups[0].count = servers;
  p.customers = customers;
  return p;
}

std::optional<Placement> reject_all(const SfcRequest&, SimState&) { return std::nullopt; }

struct TraceRow {
  double time;
  std::string kind;
  std::int64_t id;
};

std::vector<TraceRow> parse_trace(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "time,kind,id");
  std::vector<TraceRow> rows;
  while (std::getline(is, line)) {
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    rows.push_back({std::stod(line.substr(0, a)), line.substr(a + 1, b - a - 1),
                    std::stoll(line.substr(b + 1))});
  }
  return rows;
}

}  // namespace

TEST(Exponential, SampleMeans) {
  for (double rate : {0.04, 0.001}) {
    RngStream rng(17, 0);
    double sum = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const double x = sample_exponential(rate, rng);
      ASSERT_GT(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum / n, 1.0 / rate, 0.02 / rate);
  }
}

TEST(EventQueue, TimeThenSequence) {
  EventQueue q;
  q.push(2.0, EventKind::kSfcArrival, 0);
  q.push(1.0, EventKind::kServerFailure, 1);
  q.push(2.0, EventKind::kSfcDeparture, 2);
  q.push(1.0, EventKind::kServerRepair, 3);
  std::vector<std::int64_t> order;
  while (!q.empty()) order.push_back(q.pop().target);
  EXPECT_EQ(order, (std::vector<std::int64_t>{1, 3, 0, 2}));
}

TEST(Schedule, InitialEventCount) {
  ScenarioParams p;
  p.infrastructure.groups[0].count = 28;
  p.customers = 5;
  SimState sim(p, 1);
  sim.schedule_initial_events();
  EXPECT_EQ(sim.queue().size(), 33u);
  EXPECT_THROW(sim.schedule_initial_events(), UsageError);
}

TEST(Schedule, DeterministicQueue) {
  SimState a(small_scenario(), 9), b(small_scenario(), 9);
  a.schedule_initial_events();
  b.schedule_initial_events();
  EventQueue qa = a.queue(), qb = b.queue();
  while (!qa.empty()) {
    const Event x = qa.pop(), y = qb.pop();
    EXPECT_EQ(x.time, y.time);
    EXPECT_EQ(x.kind, y.kind);
    EXPECT_EQ(x.target, y.target);
  }
  EXPECT_TRUE(qb.empty());
}

TEST(Schedule, ZeroArrivalRateIsDomainError) {
  ScenarioParams p = small_scenario();
  p.lambda = 0.0;
  EXPECT_THROW(SimState(p, 1), DomainError);
}

TEST(Run, EmptyHorizon) {
  SimState sim(small_scenario(), 3);
  sim.schedule_initial_events();
  const auto r = sim.run_until(0.0, reject_all);
  EXPECT_EQ(r.requests, 0);
  EXPECT_FALSE(r.acceptance_rate().has_value());
}

TEST(Run, SameSeedSameReport) {
  ScenarioParams p = small_scenario(6, 3);
  const auto a = agents::run_baseline(agents::greedy_placer(), p, 77, 20000);
  const auto b = agents::run_baseline(agents::greedy_placer(), p, 77, 20000);
  EXPECT_TRUE(a == b);
  EXPECT_GT(a.requests, 0);
}

TEST(Run, ClockNeverDecreases) {
  SimState sim(small_scenario(), 3);
  sim.schedule_initial_events();
  sim.run_until(100.0, reject_all);
  EXPECT_EQ(sim.clock(), 100.0);
  EXPECT_THROW(sim.run_until(50.0, reject_all), UsageError);
}

TEST(Run, PoissonArrivalCount) {
  ScenarioParams p = small_scenario(2, 3);
  double observed = 0.0;
  double expected = 0.0;
  const int runs = 30;
  for (int s = 0; s < runs; ++s) {
    SimState sim(p, 1000 + static_cast<std::uint64_t>(s));
    for (const auto& c : sim.customers()) expected += c.arrival_rate * 43800.0;
    sim.schedule_initial_events();
    observed += static_cast<double>(sim.run_until(43800.0, reject_all).requests);
  }
  EXPECT_NEAR(observed / expected, 1.0, 0.05);
  EXPECT_NEAR(observed / (runs * 3), 1752.0, 0.1 * 1752.0);
}

TEST(Run, TraceOrderAndServerAlternation) {
  ScenarioParams p = small_scenario(3, 2);
  p.infrastructure.groups[0].mttf = 50.0;
  p.infrastructure.groups[0].mttr = 5.0;
  std::ostringstream trace;
  SimState sim(p, 5);
  sim.set_trace(&trace);
  sim.schedule_initial_events();
  sim.run_until(5000.0, agents::greedy_placer());
  const auto rows = parse_trace(trace.str());
  ASSERT_GT(rows.size(), 100u);
  std::map<std::int64_t, std::string> last;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i) {
      EXPECT_GE(rows[i].time, rows[i - 1].time);
    }
    if (rows[i].kind == "server_failure" || rows[i].kind == "server_repair") {
      auto it = last.find(rows[i].id);
      if (it == last.end()) {
        EXPECT_EQ(rows[i].kind, "server_failure");
      } else {
        EXPECT_NE(it->second, rows[i].kind);
      }
      last[rows[i].id] = rows[i].kind;
    }
  }
  EXPECT_EQ(last.size(), 3u);
}

TEST(Run, FailureThenRepairRestoresCapacity) {
  ScenarioParams p = small_scenario(1, 1);
  p.infrastructure.groups[0].mttf = 10.0;
  p.lambda = 1e-6;
  SimState sim(p, 2);
  sim.schedule_initial_events();
  ASSERT_TRUE(allocate(sim.servers()[0], p.catalog[0], 2, 999, 4));
  const int before = sim.servers()[0].free_resources();
  bool saw_down = false;
  for (int i = 0; i < 4; ++i) {
    const Event e = sim.queue().top();
    sim.run_until(e.time, reject_all);
    if (e.kind == EventKind::kServerFailure) {
      EXPECT_FALSE(sim.servers()[0].operational());
      EXPECT_EQ(sim.servers()[0].free_resources(), 0);
      EXPECT_EQ(sim.servers()[0].allocated(), 2);
      saw_down = true;
    } else if (e.kind == EventKind::kServerRepair) {
      EXPECT_TRUE(sim.servers()[0].operational());
      EXPECT_EQ(sim.servers()[0].free_resources(), before);
    }
  }
  EXPECT_TRUE(saw_down);
}

TEST(Run, DepartureReleasesBothServers) {
  ScenarioParams p = small_scenario(3, 1);
  SimState sim(p, 4);
  sim.schedule_initial_events();
  auto req = sim.advance_to_next_arrival(1e9);
  ASSERT_TRUE(req.has_value());
  Placement pl;
  for (std::size_t i = 0; i < req->vnf_sequence.size(); ++i) {
    const ServerId s = i % 2;
    ASSERT_TRUE(allocate(sim.servers()[s], req->vnf_sequence[i], 1, req->id, 4));
    pl.assignments.push_back({s, 1});
  }
  const int a0 = sim.servers()[0].allocated();
  const int a1 = sim.servers()[1].allocated();
  EXPECT_GT(a0, 0);
  EXPECT_GT(a1, 0);
  const CommitResult c = sim.commit(*req, pl);
  EXPECT_NEAR(c.energy, 2 * 70.17, 1e-12);
  EXPECT_EQ(sim.active_placements().size(), 1u);
  sim.run_until(req->arrival_time + req->lifetime, reject_all);
  EXPECT_EQ(sim.servers()[0].allocated(), 0);
  EXPECT_EQ(sim.servers()[1].allocated(), 0);
  EXPECT_TRUE(sim.active_placements().empty());
}

TEST(Run, RejectedRequestsHoldNothing) {
  ScenarioParams p = small_scenario(3, 2);
  SimState sim(p, 6);
  sim.schedule_initial_events();
  const auto r = sim.run_until(5000.0, reject_all);
  EXPECT_EQ(r.placed, 0);
  EXPECT_EQ(r.rejected, r.requests);
  for (const auto& s : sim.servers()) EXPECT_EQ(s.allocated(), 0);
}

TEST(Run, UnknownDepartureIsInternalError) {
  SimState sim(small_scenario(), 1);
  sim.schedule_initial_events();
  EXPECT_THROW(sim.handle_event(Event{0.5, 999, EventKind::kSfcDeparture, 12345}, reject_all),
               InternalError);
}

TEST(Run, AuditHoldsUnderLoad) {
  ScenarioParams p = small_scenario(5, 10);
  p.infrastructure.groups[0].mttf = 200.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EXPECT_NO_THROW(agents::run_baseline(agents::random_placer(), p, seed, 10000));
  }
}
