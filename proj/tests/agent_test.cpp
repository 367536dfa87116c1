#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "oracles.hpp"
#include "pccl/agent.hpp"

using namespace pccl;

namespace {

Transition numbered(double id) {
  Transition t;
  t.reward = id;
  t.state[0] = id;
  return t;
}

Transition random_transition(std::mt19937_64& rng, bool terminal = false) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Transition t;
  for (auto& v : t.state) v = u(rng);
  for (auto& v : t.action) v = u(rng);
  for (auto& v : t.next_state) v = u(rng);
  for (auto& v : t.goal) v = u(rng);
  t.goal[6] = 0.1;
  t.reward = -0.02;
  t.terminal = terminal;
  return t;
}

AgentConfig small_config() {
  AgentConfig c;
  c.hidden = {16, 16};
  return c;
}

void set_constant_output(Mlp& net, double value) {
  auto& layers = net.mutable_layers();
  for (auto& l : layers) {
    l.weights.setZero();
    l.bias.setZero();
  }
  layers.back().bias.setConstant(value);
}

void poison(Mlp& net) {
  for (auto& l : net.mutable_layers()) l.weights.setConstant(std::nan(""));
}

}  // namespace

TEST(ReplayBuffer, OverwritesOldestWhenFull) {
  ReplayBuffer b(2);
  b.push(numbered(1));
  b.push(numbered(2));
  b.push(numbered(3));
  ASSERT_EQ(b.size(), 2u);
  std::multiset<double> ids;
  for (const auto& t : b.storage()) ids.insert(t.reward);
  EXPECT_EQ(ids, (std::multiset<double>{2, 3}));
}

TEST(ReplayBuffer, CountsBelowCapacity) {
  ReplayBuffer b(10);
  for (int i = 0; i < 7; ++i) b.push(numbered(i));
  EXPECT_EQ(b.size(), 7u);
  EXPECT_EQ(b.cursor(), 7u);
}

TEST(ReplayBuffer, KeepsLastCapacityPushes) {
  ReplayBuffer b(5);
  for (int i = 0; i < 23; ++i) b.push(numbered(i));
  std::multiset<double> ids;
  for (const auto& t : b.storage()) ids.insert(t.reward);
  EXPECT_EQ(ids, (std::multiset<double>{18, 19, 20, 21, 22}));
}

TEST(ReplayBuffer, SingletonSampling) {
  ReplayBuffer b(4);
  b.push(numbered(9));
  std::mt19937_64 rng(1);
  const auto batch = b.sample(rng, 4);
  ASSERT_EQ(batch.size(), 4u);
  for (const auto& t : batch) EXPECT_EQ(t, numbered(9));
}

TEST(ReplayBuffer, EmptySampleThrows) {
  ReplayBuffer b(4);
  std::mt19937_64 rng(1);
  EXPECT_THROW(b.sample(rng, 1), EmptyBuffer);
}

TEST(ReplayBuffer, SamplingIsUniform) {
  const int n = 100;
  ReplayBuffer b(n);
  for (int i = 0; i < n; ++i) b.push(numbered(i));
  std::mt19937_64 rng(77);
  const int draws = 200000;
  std::vector<int> counts(n, 0);
  for (const auto& t : b.sample(rng, draws)) ++counts[static_cast<int>(t.reward)];
  const double p = 1.0 / n, mean = draws * p, sd = std::sqrt(draws * p * (1 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - mean), 5 * sd);
}

TEST(ReplayBuffer, SameSeedSameBatch) {
  ReplayBuffer b(50);
  for (int i = 0; i < 50; ++i) b.push(numbered(i));
  std::mt19937_64 r1(5), r2(5);
  EXPECT_EQ(b.sample(r1, 32), b.sample(r2, 32));
}

TEST(ReplayBuffer, RestoreRejectsInconsistentState) {
  ReplayBuffer b(3);
  EXPECT_THROW(b.restore(std::vector<Transition>(4), 0), LoadError);
  EXPECT_THROW(b.restore(std::vector<Transition>(2), 0), LoadError);
  EXPECT_NO_THROW(b.restore(std::vector<Transition>(3), 1));
}

TEST(SelectAction, WithoutExplorationIsPolicy) {
  std::mt19937_64 init(1), rng(2);
  DdpgAgent agent(small_config(), init);
  agent.set_explore_probability(1.0);
  std::mt19937_64 g(3);
  for (int i = 0; i < 20; ++i) {
    const Transition t = random_transition(g);
    State s;
    s.pose = Pose{t.state[0], t.state[1], t.state[2], t.state[3], t.state[4], t.state[5]};
    const AugmentedGoal goal{Pose{t.goal[0], t.goal[1], t.goal[2], t.goal[3], t.goal[4], t.goal[5]}, 0.1};
    const Action a = agent.select_action(s, goal, rng, false);
    EXPECT_EQ(a, agent.policy(s, goal));
    EXPECT_EQ(a, agent.select_action(s, goal, rng, false));
  }
}

TEST(SelectAction, FullExplorationIsUniform) {
  std::mt19937_64 init(1), rng(2024);
  DdpgAgent agent(small_config(), init);
  agent.set_explore_probability(1.0);
  const State s;
  const AugmentedGoal goal{Pose{}, 0.1};
  std::vector<std::vector<double>> cols(kActionSize);
  for (int i = 0; i < 10000; ++i) {
    const Action a = agent.select_action(s, goal, rng, true);
    for (int j = 0; j < kActionSize; ++j) cols[j].push_back(a[j]);
  }
  for (int j = 0; j < kActionSize; ++j) {
    EXPECT_LT(oracle::ks_uniform(cols[j], -1.0, 1.0), oracle::ks_critical_001(10000, kActionSize));
  }
}

TEST(SelectAction, FullExplorationRejectionRateIsCalibrated) {
  // 100 batches of 10,000 draws; per-marginal rejections at the 0.01 level
  // follow Binomial(600, 0.01), and P(X > 15) < 0.001.
  std::mt19937_64 init(1), rng(99);
  DdpgAgent agent(small_config(), init);
  agent.set_explore_probability(1.0);
  int rejections = 0;
  for (int batch = 0; batch < 100; ++batch) {
    std::vector<std::vector<double>> cols(kActionSize);
    for (int i = 0; i < 10000; ++i) {
      const Action a = agent.select_action(State{}, AugmentedGoal{Pose{}, 0.1}, rng, true);
      for (int j = 0; j < kActionSize; ++j) cols[j].push_back(a[j]);
    }
    for (const auto& c : cols) rejections += oracle::ks_uniform(c, -1.0, 1.0) > oracle::ks_critical_001(10000);
  }
  EXPECT_LE(rejections, 15);
}

TEST(SelectAction, AlwaysWithinBounds) {
  AgentConfig cfg = small_config();
  cfg.noise_sigma = 5.0;
  cfg.actor_final_scale = 50.0;
  std::mt19937_64 init(4), rng(5);
  DdpgAgent agent(cfg, init);
  agent.set_explore_probability(0.3);
  std::mt19937_64 g(6);
  for (int i = 0; i < 2000; ++i) {
    const Transition t = random_transition(g);
    State s;
    for (int k = 0; k < 6; ++k) s.joints[k] = 3 * t.next_state[k];
    const Action a = agent.select_action(s, AugmentedGoal{Pose{}, 0.1}, rng, true);
    for (int k = 0; k < kActionSize; ++k) {
      ASSERT_GE(a[k], -1.0);
      ASSERT_LE(a[k], 1.0);
    }
  }
}

TEST(CriticTarget, TerminalSuccessIsReward) {
  std::mt19937_64 init(1), g(2);
  DdpgAgent agent(small_config(), init);
  Transition t = random_transition(g, true);
  t.reward = 1.0;
  EXPECT_EQ(agent.critic_target({t})(0), 1.0);
}

TEST(CriticTarget, BootstrapArithmetic) {
  std::mt19937_64 init(1), g(2);
  DdpgAgent agent(small_config(), init);
  set_constant_output(agent.mutable_target_critic(), 0.5);
  const Transition t = random_transition(g);
  EXPECT_NEAR(agent.critic_target({t})(0), 0.47, 1e-15);
}

TEST(CriticTarget, ZeroDiscountReturnsRewards) {
  AgentConfig cfg = small_config();
  cfg.gamma = 0.0;
  std::mt19937_64 init(1), g(2);
  DdpgAgent agent(cfg, init);
  std::vector<Transition> batch;
  for (int i = 0; i < 8; ++i) {
    batch.push_back(random_transition(g));
    batch.back().reward = -0.1 * i;
  }
  const Eigen::VectorXd y = agent.critic_target(batch);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(y(i), batch[i].reward);
}

TEST(CriticTarget, AllTerminalBatchNeverBootstraps) {
  std::mt19937_64 init(1), g(2);
  DdpgAgent agent(small_config(), init);
  poison(agent.mutable_target_actor());
  poison(agent.mutable_target_critic());
  std::vector<Transition> batch;
  for (int i = 0; i < 16; ++i) {
    batch.push_back(random_transition(g, true));
    batch.back().reward = 1.0;
  }
  const Eigen::VectorXd y = agent.critic_target(batch);
  EXPECT_TRUE(y.allFinite());
  EXPECT_EQ(y, Eigen::VectorXd::Ones(16));
  EXPECT_NO_THROW(agent.train_step(batch));
}

TEST(TrainStep, CriticAtTargetIsStationary) {
  AgentConfig cfg = small_config();
  cfg.gamma = 0.0;
  std::mt19937_64 init(1), g(2);
  DdpgAgent agent(cfg, init);
  set_constant_output(agent.mutable_critic(), -0.02);
  const ParamSet before = agent.critic().parameters();
  std::vector<Transition> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(random_transition(g));
  const auto [loss, grad] = agent.critic_loss_gradient(batch, agent.critic_target(batch));
  EXPECT_EQ(loss, 0.0);
  EXPECT_EQ(grad.max_abs(), 0.0);
  agent.train_step(batch);
  EXPECT_EQ(oracle::max_relative_error(agent.critic().parameters(), before, 1.0), 0.0);
}

TEST(TrainStep, SingleTransitionCriticDescent) {
  AgentConfig cfg = small_config();
  cfg.hidden = {4};
  cfg.gamma = 0.0;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.critic_lr = 1e-4;
  std::mt19937_64 init(3), g(4);
  DdpgAgent agent(cfg, init);
  const std::vector<Transition> batch{random_transition(g)};
  const Eigen::VectorXd y = agent.critic_target(batch);
  const double before = agent.critic_loss_gradient(batch, y).first;
  ASSERT_GT(before, 0.0);
  agent.train_step(batch);
  EXPECT_LT(agent.critic_loss_gradient(batch, y).first, before);
}

TEST(TrainStep, ActorGradientMatchesFiniteDifferences) {
  AgentConfig cfg = small_config();
  cfg.hidden = {6, 5};
  cfg.actor_final_scale = 1.0;
  std::mt19937_64 init(5), g(6);
  DdpgAgent agent(cfg, init);
  std::vector<Transition> batch(4);
  do {
    for (auto& t : batch) t = random_transition(g);
  } while (oracle::composed_hidden_margin(agent, batch) < 1e-3);
  const auto [mean_q, grad] = agent.actor_objective_gradient(batch);
  Mlp& actor = agent.mutable_actor();
  auto f = [&] { return agent.actor_objective_gradient(batch).first; };
  EXPECT_DOUBLE_EQ(f(), mean_q);
  const ParamSet fd = oracle::finite_difference_params(actor, f);
  EXPECT_LE(oracle::max_relative_error(grad, fd, 1e-4), 1e-3);
}

TEST(TrainStep, TargetDriftIsBoundedByTau) {
  AgentConfig cfg = small_config();
  cfg.tau = 0.01;
  std::mt19937_64 init(7), g(8);
  DdpgAgent agent(cfg, init);
  std::vector<Transition> batch;
  for (int i = 0; i < 16; ++i) batch.push_back(random_transition(g));
  for (int step = 0; step < 5; ++step) {
    const ParamSet old_target = agent.target_critic().parameters();
    agent.train_step(batch);
    const ParamSet online = agent.critic().parameters(), target = agent.target_critic().parameters();
    double drift = 0.0, gap = 0.0;
    for (std::size_t l = 0; l < online.weights.size(); ++l) {
      drift = std::max(drift, (target.weights[l] - old_target.weights[l]).cwiseAbs().maxCoeff());
      gap = std::max(gap, (online.weights[l] - old_target.weights[l]).cwiseAbs().maxCoeff());
    }
    EXPECT_LE(drift, cfg.tau * gap * (1 + 1e-12));
  }
}

TEST(TrainStep, RejectsEmptyBatch) {
  std::mt19937_64 init(1);
  DdpgAgent agent(small_config(), init);
  EXPECT_THROW(agent.train_step({}), InvalidInput);
}

TEST(TrainStep, NonFiniteLossRaisesDivergence) {
  std::mt19937_64 init(1), g(2);
  DdpgAgent agent(small_config(), init);
  Transition t = random_transition(g);
  t.reward = INFINITY;
  EXPECT_THROW(agent.train_step({t}), TrainingDivergence);
}

TEST(Exploration, AnnealsOverFirstHalf) {
  const AgentConfig cfg;
  EXPECT_DOUBLE_EQ(exploration_probability(cfg, 0, 100), 0.2);
  EXPECT_DOUBLE_EQ(exploration_probability(cfg, 25, 100), 0.125);
  EXPECT_DOUBLE_EQ(exploration_probability(cfg, 50, 100), 0.05);
  EXPECT_DOUBLE_EQ(exploration_probability(cfg, 99, 100), 0.05);
}

TEST(AgentConfig, RejectsInvalidValues) {
  AgentConfig c;
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), InvalidConfig);
  c = AgentConfig{};
  c.actor_lr = 0.0;
  EXPECT_THROW(c.validate(), InvalidConfig);
  c = AgentConfig{};
  c.hidden = {0};
  EXPECT_THROW(c.validate(), InvalidConfig);
}
