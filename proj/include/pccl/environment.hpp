#pragma once

// Multi-goal reach MDP for a kinematically simulated arm. Actions are
// normalized joint increments; goals are forward-kinematics images of
// uniformly sampled joint configurations, so every goal is reachable.

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "pccl/curriculum.hpp"
#include "pccl/errors.hpp"
#include "pccl/kinematics.hpp"

namespace pccl {

// Largest joint change produced by a unit action component.
inline constexpr double kMaxJointIncrement = kPi / 6.0;
inline constexpr double kSparseStepPenalty = -0.02;
inline constexpr double kSuccessReward = 1.0;

inline JointVector initial_joints() {
  return JointVector{{-kPi / 2, -kPi / 2, 0.0, kPi / 2, kPi / 2, -kPi / 2}};
}

enum class RewardMode { Dense, Sparse };

inline std::string to_string(RewardMode m) { return m == RewardMode::Dense ? "dense" : "sparse"; }

inline RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "dense") return RewardMode::Dense;
  if (s == "sparse") return RewardMode::Sparse;
  throw InvalidConfig("unknown reward mode '" + s + "' (expected dense or sparse)");
}

struct State {
  Pose pose;
  JointVector joints;

  static constexpr std::size_t kSize = 12;

  std::array<double, kSize> flat() const {
    return {pose.x,    pose.y,    pose.z,    pose.rx,   pose.ry,   pose.rz,
            joints[0], joints[1], joints[2], joints[3], joints[4], joints[5]};
  }
  bool operator==(const State&) const = default;
};

struct Action {
  std::array<double, kNumJoints> a{};

  double& operator[](std::size_t i) { return a[i]; }
  double operator[](std::size_t i) const { return a[i]; }
  bool operator==(const Action&) const = default;
};

struct StepResult {
  State next_state;
  double reward = 0.0;
  bool done = false;
  bool success = false;
  double dist_p = 0.0;
  double dist_o = 0.0;
};

struct GoalSample {
  Pose pose;
  JointVector joints;  // generating configuration
};

// Success test shared by both reward modes; the boundary counts as success.
inline bool within_precision(double dist_p, double dist_o, double epsilon) {
  return dist_p <= epsilon && dist_o <= epsilon;
}

inline double reward_dense(double dist_p, double dist_o, double weighted, double epsilon) {
  return within_precision(dist_p, dist_o, epsilon) ? kSuccessReward : -weighted;
}

inline double reward_sparse(double dist_p, double dist_o, double epsilon) {
  return within_precision(dist_p, dist_o, epsilon) ? kSuccessReward : kSparseStepPenalty;
}

struct EnvConfig {
  DhChain chain = DhChain::ur5e();
  JointLimits limits{};
  DistanceWeights weights{};
  JointVector start = initial_joints();

  void validate() const {
    chain.validate();
    limits.validate();
    weights.validate();
    if (!limits.contains(start)) throw InvalidConfig("initial configuration violates joint limits");
  }

  bool operator==(const EnvConfig&) const = default;
};

// Applies joint-4 coupling to a configuration, then clamps joint 4.
inline void apply_coupling(JointVector& q, const JointLimits& limits) {
  q[3] = limits.joints[3].clamp(couple_joint4(q[1], q[2]));
}

inline GoalSample sample_goal(std::mt19937_64& rng, const JointLimits& limits, const DhChain& chain) {
  GoalSample g;
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    const auto& lim = limits.joints[i];
    if (lim.lo == lim.hi) {
      g.joints[i] = lim.lo;
    } else {
      std::uniform_real_distribution<double> u(lim.lo, lim.hi);
      g.joints[i] = u(rng);
    }
  }
  apply_coupling(g.joints, limits);
  g.pose = forward_kinematics(g.joints, chain);
  return g;
}

class ReachEnv {
 public:
  explicit ReachEnv(EnvConfig config, RewardMode mode = RewardMode::Dense)
      : config_(std::move(config)), mode_(mode) {
    config_.validate();
  }

  const EnvConfig& config() const { return config_; }
  RewardMode mode() const { return mode_; }

  State initial_state() const {
    JointVector q = config_.start;
    return State{forward_kinematics(q, config_.chain), q};
  }

  GoalSample sample_goal(std::mt19937_64& rng) const {
    return pccl::sample_goal(rng, config_.limits, config_.chain);
  }

  // Starts an episode from the fixed initial configuration towards a fresh
  // goal at precision `epsilon`. The generating joints of the goal are written
  // to `goal_joints` when non-null.
  std::pair<State, AugmentedGoal> reset(std::mt19937_64& rng, double epsilon,
                                        JointVector* goal_joints = nullptr) const {
    if (!(epsilon > 0.0)) throw InvalidInput("reset: epsilon must be > 0");
    GoalSample g = sample_goal(rng);
    if (goal_joints != nullptr) *goal_joints = g.joints;
    return {initial_state(), augment_goal(g.pose, epsilon)};
  }

  StepResult step(const State& state, const Action& action, const AugmentedGoal& goal) const {
    for (double v : action.a) {
      if (!std::isfinite(v) || v < -1.0 || v > 1.0) {
        throw InvalidAction("step: action components must lie in [-1, 1]");
      }
    }
    JointVector q = state.joints;
    for (std::size_t i = 0; i < kNumJoints; ++i) {
      if (i == 3) continue;
      q[i] = config_.limits.joints[i].clamp(q[i] + action[i] * kMaxJointIncrement);
    }
    apply_coupling(q, config_.limits);

    StepResult out;
    out.next_state = State{forward_kinematics(q, config_.chain), q};
    const PoseDistance d = pose_distance(out.next_state.pose, goal.target, config_.weights);
    out.dist_p = d.position;
    out.dist_o = d.orientation;
    out.success = within_precision(d.position, d.orientation, goal.epsilon);
    out.done = out.success;
    out.reward = mode_ == RewardMode::Dense
                     ? reward_dense(d.position, d.orientation, d.weighted, goal.epsilon)
                     : reward_sparse(d.position, d.orientation, goal.epsilon);
    return out;
  }

 private:
  EnvConfig config_;
  RewardMode mode_;
};

}  // namespace pccl
