#include <gtest/gtest.h>

#include "sfcrl/env.hpp"

using namespace sfcrl;

namespace {

constexpr double kAs = 8760.0 / (8760.0 + 1.667);
constexpr double kAv = 2880.0 / (2880.0 + 0.17);

EnvConfig small_env(int servers = 4, int customers = 2) {
  EnvConfig c;
  c.scenario.infrastructure.groups[0].count = servers;
  c.scenario.customers = customers;
  return c;
}

SfcRequest scripted(std::vector<VnfType> chain, double theta = 0.999) {
  SfcRequest r;
  r.id = 1'000'000;
  r.theta = theta;
  r.vnf_sequence = std::move(chain);
  r.lifetime = 10.0;
  return r;
}

const VnfType kIds{0, "IDS", 1};
const VnfType kFw{1, "Firewall", 1};
const VnfType kWan{2, "WAN-opt", 4};

}  // namespace

TEST(ActionIndex, Bijection) {
  const int vm_max = 4;
  for (std::size_t a = 0; a < 28 * 4; ++a) {
    const ActionIndex idx{a};
    const auto s = idx.server(vm_max);
    const int q = idx.redundancy(vm_max);
    EXPECT_GE(q, 1);
    EXPECT_LE(q, vm_max);
    EXPECT_EQ(ActionIndex::encode(s, q, vm_max).value, a);
  }
}

TEST(Observation, Table1Layout) {
  EnvConfig c;
  c.scenario.infrastructure.groups[0].count = 28;
  SfcEnv env(c);
  const auto obs = env.reset(1);
  ASSERT_EQ(obs.size(), 58u);
  EXPECT_EQ(env.observation_size(), 58u);
  EXPECT_EQ(env.action_count(), 112u);
  for (int i = 0; i < 28; ++i) {
    EXPECT_EQ(obs[static_cast<std::size_t>(i)], 1.0);
    EXPECT_NEAR(obs[static_cast<std::size_t>(28 + i)], 0.9998097394, 1e-10);
  }
  EXPECT_EQ(obs[57], 0.999);
}

TEST(Observation, GroupTwoAvailability) {
  EnvConfig c = small_env(2);
  ServerGroup g2;
  g2.label = 2;
  g2.count = 2;
  g2.mttf = 7884.0;
  c.scenario.infrastructure.groups.push_back(g2);
  SfcEnv env(c);
  const auto obs = env.reset(1);
  EXPECT_NEAR(obs[4], kAs, 1e-15);
  EXPECT_NEAR(obs[6], 7884.0 / (7884.0 + 1.667), 1e-15);
  EXPECT_NEAR(obs[6], 0.9997886, 1e-7);
}

TEST(Observation, NormalizationAndDemand) {
  SfcEnv env(small_env(3));
  env.reset(2);
  auto obs = env.present_request(scripted({kWan, kFw}));
  EXPECT_EQ(obs[2 * 3], 1.0);  // WAN-opt 4/4
  const auto out = env.step(ActionIndex::encode(1, 1, 4));
  EXPECT_EQ(out.reward, 0.0);
  EXPECT_NEAR(out.observation[1], 0.6, 1e-15);
  EXPECT_EQ(out.observation[2 * 3], 0.25);
}

TEST(Observation, DeterministicReset) {
  SfcEnv a(small_env()), b(small_env());
  EXPECT_EQ(a.reset(31), b.reset(31));
}

TEST(Reward, SingleVnfReference) {
  SfcEnv env(small_env());
  env.reset(3);
  env.present_request(scripted({kIds}));
  const auto out = env.step(ActionIndex::encode(0, 1, 4));
  ASSERT_TRUE(out.info.sfc_completed);
  const double expected = (kAs * kAv - 0.999) * 1000.0 - 70.17 * 0.005 + 2.0;
  EXPECT_NEAR(out.reward, expected, 1e-9);
  EXPECT_NEAR(out.reward, 2.39988, 1e-5);
  EXPECT_TRUE(out.info.sfc_accepted);
  EXPECT_NEAR(*out.info.sfc_energy, 70.17, 1e-12);
}

TEST(Reward, ConstantTermIsolated) {
  EnvConfig c = small_env(4, 3);
  c.rho = 0.0;
  c.sigma = 0.0;
  SfcEnv env(c);
  env.reset(4);
  RngStream rng(4, 9);
  int completed = 0;
  for (int i = 0; i < 3000 && !env.done(); ++i) {
    const auto out = env.step(ActionIndex{static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(env.action_count()) - 1))});
    if (out.info.sfc_completed) {
      EXPECT_EQ(out.reward, 2.0);
      ++completed;
    }
  }
  EXPECT_GT(completed, 0);
}

TEST(Reward, InsufficientCapacityThenRejection) {
  EnvConfig c = small_env(2);
  SfcEnv env(c);
  env.reset(5);
  env.present_request(scripted({kFw, kWan}));
  // Leave three free units on server 1.
  ASSERT_TRUE(allocate(env.mutable_sim().servers()[1], kFw, 4, 77, 4));
  ASSERT_TRUE(allocate(env.mutable_sim().servers()[1], kFw, 3, 78, 4));
  std::vector<int> before;
  for (const auto& s : env.sim().servers()) before.push_back(s.allocated());

  auto first = env.step(ActionIndex::encode(0, 2, 4));
  EXPECT_EQ(first.reward, 0.0);
  const auto obs_before = env.observation();
  auto fail = env.step(ActionIndex::encode(1, 1, 4));
  EXPECT_EQ(fail.reward, -1.0);
  EXPECT_EQ(fail.observation, obs_before);
  EXPECT_EQ(env.step(ActionIndex::encode(1, 1, 4)).reward, -1.0);
  auto rejected = env.step(ActionIndex::encode(1, 1, 4));
  EXPECT_EQ(rejected.reward, -5.0);
  EXPECT_TRUE(rejected.info.sfc_rejected);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(env.sim().servers()[i].allocated(), before[i]);
  }
}

TEST(Reward, SuccessResetsRetryCounter) {
  SfcEnv env(small_env(2));
  env.reset(6);
  env.present_request(scripted({kWan, kWan, kIds}));
  ASSERT_TRUE(allocate(env.mutable_sim().servers()[1], kFw, 4, 77, 4));
  ASSERT_TRUE(allocate(env.mutable_sim().servers()[1], kFw, 3, 78, 4));
  EXPECT_EQ(env.step(ActionIndex::encode(1, 1, 4)).reward, -1.0);
  EXPECT_EQ(env.step(ActionIndex::encode(1, 1, 4)).reward, -1.0);
  EXPECT_EQ(env.step(ActionIndex::encode(0, 1, 4)).reward, 0.0);
  EXPECT_EQ(env.step(ActionIndex::encode(1, 1, 4)).reward, -1.0);
  EXPECT_EQ(env.step(ActionIndex::encode(1, 1, 4)).reward, -1.0);
  EXPECT_EQ(env.step(ActionIndex::encode(0, 1, 4)).reward, 0.0);
}

TEST(Step, Errors) {
  SfcEnv env(small_env(2));
  env.reset(7);
  EXPECT_THROW(env.step(ActionIndex{env.action_count()}), UsageError);
  EnvConfig c = small_env(2);
  c.max_episode_steps = 1;
  SfcEnv once(c);
  once.reset(7);
  EXPECT_TRUE(once.step(ActionIndex{0}).done);
  EXPECT_THROW(once.step(ActionIndex{0}), UsageError);
}

TEST(Step, BranchExclusivityAndBounds) {
  EnvConfig c = small_env(3, 4);
  SfcEnv env(c);
  env.reset(8);
  RngStream rng(8, 3);
  std::optional<RequestId> current;
  for (int i = 0; i < 20000 && !env.done(); ++i) {
    if (!env.pending_request()) break;
    current = env.pending_request()->id;
    const auto out = env.step(ActionIndex{static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(env.action_count()) - 1))});
    const int branches = (out.reward == -1.0) + (out.reward == -5.0) +
                         (out.reward == 0.0 && !out.info.sfc_completed) +
                         out.info.sfc_completed;
    EXPECT_EQ(branches, 1);
    EXPECT_EQ(out.reward == -5.0, out.info.sfc_rejected);
    for (double x : out.observation) {
      ASSERT_GE(x, 0.0);
      ASSERT_LE(x, 1.0);
    }
    if (out.info.sfc_rejected) {
      // Rollback leaves no trace of the rejected chain.
      int held = 0;
      for (const auto& s : env.sim().servers()) {
        for (const auto& h : s.hosted()) {
          if (h.request == *current) ++held;
        }
      }
      EXPECT_EQ(held, 0);
    }
  }
  const auto m = env.episode_metrics();
  EXPECT_EQ(m.requests, m.placed + m.rejected + (env.pending_request() ? 1 : 0));
}

TEST(Episode, NoRequestsGivesUndefinedRate) {
  EnvConfig c = small_env(2, 1);
  c.scenario.lambda = 1e-9;
  SfcEnv env(c);
  env.reset(9);
  EXPECT_TRUE(env.done());
  const auto m = env.episode_metrics();
  EXPECT_EQ(m.requests, 0);
  EXPECT_FALSE(m.acceptance_rate.has_value());
}

TEST(Episode, AllAcceptedGivesOne) {
  EnvConfig c = small_env(4, 1);
  c.scenario.theta = 0.99;
  c.scenario.shape = {1, 1};
  c.scenario.mu = 1.0;
  c.episode_hours = 2000.0;
  SfcEnv env(c);
  env.reset(10);
  while (!env.done()) {
    std::size_t best = 0;
    int most = -1;
    for (std::size_t s = 0; s < 4; ++s) {
      if (env.sim().servers()[s].free_resources() > most) {
        most = env.sim().servers()[s].free_resources();
        best = s;
      }
    }
    env.step(ActionIndex::encode(best, 1, 4));
  }
  const auto m = env.episode_metrics();
  ASSERT_GT(m.requests, 0);
  EXPECT_EQ(m.acceptance_rate, 1.0);
}
