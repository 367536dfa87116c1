#pragma once

// Goal-conditioned DDPG: actor/critic pairs with Polyak-averaged targets,
// a FIFO replay buffer and epsilon-greedy + Gaussian exploration.
//
// Network inputs: actor [state(12), goal(7)], critic [state(12), action(6), goal(7)].

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pccl/curriculum.hpp"
#include "pccl/environment.hpp"
#include "pccl/errors.hpp"
#include "pccl/neural.hpp"

namespace pccl {

inline constexpr int kStateSize = static_cast<int>(State::kSize);
inline constexpr int kActionSize = static_cast<int>(kNumJoints);
inline constexpr int kGoalSize = static_cast<int>(AugmentedGoal::kSize);
inline constexpr int kActorInputSize = kStateSize + kGoalSize;
inline constexpr int kCriticInputSize = kStateSize + kActionSize + kGoalSize;

struct Transition {
  std::array<double, State::kSize> state{};
  std::array<double, kNumJoints> action{};
  std::array<double, State::kSize> next_state{};
  double reward = 0.0;
  std::array<double, AugmentedGoal::kSize> goal{};
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InvalidConfig("replay buffer capacity must be >= 1");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  // Slot the next push writes to.
  std::size_t cursor() const { return cursor_; }

  void push(const Transition& t) {
    if (data_.size() < capacity_) {
      data_.push_back(t);
    } else {
      data_[cursor_] = t;
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  // Uniform draws with replacement.
  std::vector<Transition> sample(std::mt19937_64& rng, std::size_t n) const {
    if (data_.empty()) throw EmptyBuffer("cannot sample from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<Transition> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) batch.push_back(data_[pick(rng)]);
    return batch;
  }

  const std::vector<Transition>& storage() const { return data_; }

  // Restores raw ring state; used by checkpoint loading.
  void restore(std::vector<Transition> data, std::size_t cursor) {
    if (data.size() > capacity_ || (data.size() < capacity_ && cursor != data.size() % capacity_) ||
        cursor >= capacity_) {
      throw LoadError("replay buffer state is inconsistent with its capacity");
    }
    data_ = std::move(data);
    cursor_ = cursor;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> data_;
  std::size_t cursor_ = 0;
};

enum class OptimizerKind { Adam, Sgd };

struct AgentConfig {
  std::vector<int> hidden{64, 64};
  double gamma = 0.98;
  double tau = 0.01;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double noise_sigma = 0.1;
  // Probability of a uniformly random action; annealed linearly from
  // `explore_start` to `explore_end` over the first half of training.
  double explore_start = 0.2;
  double explore_end = 0.05;
  double actor_final_scale = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;

  void validate() const {
    for (int w : hidden) {
      if (w < 1) throw InvalidConfig("hidden layer widths must be positive");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidConfig("gamma must lie in [0, 1]");
    if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidConfig("tau must lie in [0, 1]");
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw InvalidConfig("learning rates must be > 0");
    if (!(noise_sigma >= 0.0)) throw InvalidConfig("noise sigma must be >= 0");
    if (!(explore_start >= 0.0 && explore_start <= 1.0 && explore_end >= 0.0 &&
          explore_end <= 1.0)) {
      throw InvalidConfig("exploration probabilities must lie in [0, 1]");
    }
    if (!(actor_final_scale > 0.0)) throw InvalidConfig("actor final-layer scale must be > 0");
  }

  bool operator==(const AgentConfig&) const = default;
};

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw InvalidConfig("unknown optimizer '" + s + "' (expected adam or sgd)");
}

// Linear annealing over the first half of `total_epochs`, then constant.
inline double exploration_probability(const AgentConfig& cfg, std::int64_t epoch,
                                      std::int64_t total_epochs) {
  const double half = std::max<double>(1.0, static_cast<double>(total_epochs) / 2.0);
  const double frac = std::min(1.0, static_cast<double>(epoch) / half);
  return cfg.explore_start + (cfg.explore_end - cfg.explore_start) * frac;
}

struct TrainStats {
  double critic_loss = 0.0;
  double mean_q = 0.0;
};

namespace detail {

template <std::size_t N>
inline void put(Eigen::MatrixXd& m, Eigen::Index col, Eigen::Index row0, const std::array<double, N>& v) {
  for (std::size_t i = 0; i < N; ++i) m(row0 + static_cast<Eigen::Index>(i), col) = v[i];
}

}  // namespace detail

class DdpgAgent {
 public:
  DdpgAgent(AgentConfig config, std::mt19937_64& init_rng) : config_(std::move(config)) {
    config_.validate();
    std::vector<int> actor_widths{kActorInputSize};
    std::vector<int> critic_widths{kCriticInputSize};
    for (int w : config_.hidden) {
      actor_widths.push_back(w);
      critic_widths.push_back(w);
    }
    actor_widths.push_back(kActionSize);
    critic_widths.push_back(1);
    actor_ = Mlp(actor_widths, OutputActivation::Tanh);
    critic_ = Mlp(critic_widths, OutputActivation::Identity);
    actor_.initialize(init_rng, config_.actor_final_scale);
    critic_.initialize(init_rng);
    target_actor_ = actor_;
    target_critic_ = critic_;
    actor_opt_ = AdamState::for_network(actor_);
    critic_opt_ = AdamState::for_network(critic_);
    explore_probability_ = config_.explore_start;
  }

  const AgentConfig& config() const { return config_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  const Mlp& target_actor() const { return target_actor_; }
  const Mlp& target_critic() const { return target_critic_; }
  Mlp& mutable_actor() { return actor_; }
  Mlp& mutable_critic() { return critic_; }
  Mlp& mutable_target_actor() { return target_actor_; }
  Mlp& mutable_target_critic() { return target_critic_; }
  const AdamState& actor_optimizer() const { return actor_opt_; }
  const AdamState& critic_optimizer() const { return critic_opt_; }
  AdamState& mutable_actor_optimizer() { return actor_opt_; }
  AdamState& mutable_critic_optimizer() { return critic_opt_; }

  double explore_probability() const { return explore_probability_; }
  void set_explore_probability(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("exploration probability must lie in [0, 1]");
    explore_probability_ = p;
  }

  // Deterministic policy output for one (state, goal).
  Action policy(const State& state, const AugmentedGoal& goal) const {
    return policy_of(actor_, state, goal);
  }

  static Action policy_of(const Mlp& actor, const State& state, const AugmentedGoal& goal) {
    Eigen::MatrixXd in(kActorInputSize, 1);
    detail::put(in, 0, 0, state.flat());
    detail::put(in, 0, kStateSize, goal.flat());
    const Eigen::MatrixXd out = actor.forward(in).output;
    Action a;
    for (int i = 0; i < kActionSize; ++i) a[i] = std::clamp(out(i, 0), -1.0, 1.0);
    return a;
  }

  Action select_action(const State& state, const AugmentedGoal& goal, std::mt19937_64& rng,
                       bool explore) const {
    if (!explore) return policy(state, goal);
    std::bernoulli_distribution coin(explore_probability_);
    Action a;
    if (coin(rng)) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (int i = 0; i < kActionSize; ++i) a[i] = u(rng);
      return a;
    }
    a = policy(state, goal);
    for (int i = 0; i < kActionSize; ++i) {
      std::normal_distribution<double> noise(0.0, config_.noise_sigma);
      a[i] = std::clamp(a[i] + noise(rng), -1.0, 1.0);
    }
    return a;
  }

  // Bootstrapped regression targets; success-terminal rows skip the
  // next-state evaluation entirely.
  Eigen::VectorXd critic_target(const std::vector<Transition>& batch) const {
    const auto n = static_cast<Eigen::Index>(batch.size());
    Eigen::VectorXd y(n);
    std::vector<Eigen::Index> live;
    for (Eigen::Index i = 0; i < n; ++i) {
      y(i) = batch[i].reward;
      if (!batch[i].terminal) live.push_back(i);
    }
    if (live.empty() || config_.gamma == 0.0) return y;

    const auto m = static_cast<Eigen::Index>(live.size());
    Eigen::MatrixXd actor_in(kActorInputSize, m);
    for (Eigen::Index c = 0; c < m; ++c) {
      const Transition& t = batch[live[c]];
      detail::put(actor_in, c, 0, t.next_state);
      detail::put(actor_in, c, kStateSize, t.goal);
    }
    const Eigen::MatrixXd next_actions = target_actor_.forward(actor_in).output;
    Eigen::MatrixXd critic_in(kCriticInputSize, m);
    critic_in.topRows(kStateSize) = actor_in.topRows(kStateSize);
    critic_in.middleRows(kStateSize, kActionSize) = next_actions;
    critic_in.bottomRows(kGoalSize) = actor_in.bottomRows(kGoalSize);
    const Eigen::MatrixXd q_next = target_critic_.forward(critic_in).output;
    for (Eigen::Index c = 0; c < m; ++c) y(live[c]) += config_.gamma * q_next(0, c);
    return y;
  }

  static Eigen::MatrixXd critic_inputs(const std::vector<Transition>& batch) {
    Eigen::MatrixXd in(kCriticInputSize, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      detail::put(in, c, 0, batch[i].state);
      detail::put(in, c, kStateSize, batch[i].action);
      detail::put(in, c, kStateSize + kActionSize, batch[i].goal);
    }
    return in;
  }

  static Eigen::MatrixXd actor_inputs(const std::vector<Transition>& batch) {
    Eigen::MatrixXd in(kActorInputSize, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      detail::put(in, c, 0, batch[i].state);
      detail::put(in, c, kStateSize, batch[i].goal);
    }
    return in;
  }

  // Mean squared TD error and its parameter gradient.
  std::pair<double, ParamSet> critic_loss_gradient(const std::vector<Transition>& batch,
                                                   const Eigen::VectorXd& targets) const {
    const ForwardCache cache = critic_.forward(critic_inputs(batch));
    const auto n = static_cast<double>(batch.size());
    const Eigen::RowVectorXd diff = cache.output.row(0) - targets.transpose();
    const double loss = diff.squaredNorm() / n;
    const Eigen::MatrixXd grad_out = (2.0 / n) * diff;
    return {loss, critic_.backward(cache, grad_out).params};
  }

  // Gradient of mean Q(s, pi(s, g), g) with respect to the actor parameters
  // (an ascent direction), together with that mean.
  std::pair<double, ParamSet> actor_objective_gradient(const std::vector<Transition>& batch) const {
    const Eigen::MatrixXd actor_in = actor_inputs(batch);
    const ForwardCache actor_cache = actor_.forward(actor_in);
    Eigen::MatrixXd critic_in(kCriticInputSize, actor_in.cols());
    critic_in.topRows(kStateSize) = actor_in.topRows(kStateSize);
    critic_in.middleRows(kStateSize, kActionSize) = actor_cache.output;
    critic_in.bottomRows(kGoalSize) = actor_in.bottomRows(kGoalSize);
    const ForwardCache critic_cache = critic_.forward(critic_in);
    const auto n = static_cast<double>(batch.size());
    const double mean_q = critic_cache.output.sum() / n;
    const Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(1, actor_in.cols(), 1.0 / n);
    const Mlp::Gradients cg = critic_.backward(critic_cache, dq);
    const Eigen::MatrixXd dq_da = cg.input_grad.middleRows(kStateSize, kActionSize);
    return {mean_q, actor_.backward(actor_cache, dq_da).params};
  }

  // One critic descent step, one actor ascent step, then target averaging.
  TrainStats train_step(const std::vector<Transition>& batch) {
    if (batch.empty()) throw InvalidInput("train_step: empty batch");
    const Eigen::VectorXd y = critic_target(batch);
    auto [loss, critic_grad] = critic_loss_gradient(batch, y);
    if (!std::isfinite(loss) || !critic_grad.all_finite()) {
      throw TrainingDivergence("critic loss diverged (loss = " + std::to_string(loss) +
                               ", max |target| = " + std::to_string(y.cwiseAbs().maxCoeff()) + ")");
    }
    apply(critic_, critic_grad, critic_opt_, config_.critic_lr);

    auto [mean_q, actor_grad] = actor_objective_gradient(batch);
    if (!std::isfinite(mean_q) || !actor_grad.all_finite()) {
      throw TrainingDivergence("actor objective diverged (mean Q = " + std::to_string(mean_q) + ")");
    }
    for (auto& w : actor_grad.weights) w = -w;
    for (auto& b : actor_grad.bias) b = -b;
    apply(actor_, actor_grad, actor_opt_, config_.actor_lr);

    soft_update(target_critic_, critic_, config_.tau);
    soft_update(target_actor_, actor_, config_.tau);
    return {loss, mean_q};
  }

 private:
  void apply(Mlp& net, const ParamSet& grad, AdamState& opt, double lr) {
    if (config_.optimizer == OptimizerKind::Adam) {
      adam_step(net, grad, opt, lr);
    } else {
      sgd_step(net, grad, lr);
    }
  }

  AgentConfig config_;
  Mlp actor_, critic_, target_actor_, target_critic_;
  AdamState actor_opt_, critic_opt_;
  double explore_probability_ = 0.0;
};

}  // namespace pccl
