#pragma once

// Run configuration: defaults, the `paper` and `desk` profiles, and the
// JSON config-file format (nested objects; unknown keys are rejected).

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>  // nlohmann/json (vendored)

#include "pccl/agent.hpp"
#include "pccl/curriculum.hpp"
#include "pccl/environment.hpp"
#include "pccl/errors.hpp"

namespace pccl {

struct CurriculumConfig {
  double start = 0.15;
  double end = 0.01;
  std::int64_t decay_epochs = 1000;
  double slope = 0.8;
  // Baseline arm: train at a fixed precision instead of the decay.
  bool baseline = false;
  std::optional<double> baseline_epsilon;  // defaults to `end`

  double fixed_epsilon() const { return baseline_epsilon.value_or(end); }
  DecaySchedule schedule() const { return DecaySchedule(start, end, decay_epochs, slope); }

  bool operator==(const CurriculumConfig&) const = default;
};

struct RunConfig {
  RewardMode reward = RewardMode::Dense;
  std::uint64_t seed = 1;
  CurriculumConfig curriculum{};
  AgentConfig agent{.hidden = {512, 256, 64}};
  EnvConfig env{};

  std::int64_t epochs = 3000;
  int episodes_per_epoch = 10;
  int steps_per_episode = 100;
  int train_steps_per_epoch = 64;
  int batch_size = 128;
  std::size_t buffer_capacity = 5'000'000;
  std::int64_t checkpoint_every = 0;  // 0: only at the end
  bool save_buffer = true;

  int metrics_every = 10;
  int eval_every = 100;
  int eval_goals = 100;
  double final_eval_epsilon = 0.01;
  int final_eval_goals = 100;
  bool wall_clock_in_metrics = false;

  void validate() const {
    if (epochs < 1 || episodes_per_epoch < 1 || steps_per_episode < 1 || batch_size < 1 ||
        buffer_capacity < 1 || metrics_every < 1 || eval_every < 1 || eval_goals < 1 ||
        final_eval_goals < 1) {
      throw InvalidConfig("all counts must be positive");
    }
    if (train_steps_per_epoch < 0 || checkpoint_every < 0) {
      throw InvalidConfig("train_steps_per_epoch and checkpoint_every must be >= 0");
    }
    if (!curriculum.baseline) {
      (void)curriculum.schedule();
    } else if (!(curriculum.fixed_epsilon() > 0.0)) {
      throw InvalidConfig("baseline epsilon must be > 0");
    }
    if (!(final_eval_epsilon > 0.0)) throw InvalidConfig("final evaluation epsilon must be > 0");
    agent.validate();
    env.validate();
  }

  // Training precision for epoch `k`.
  double epsilon_at(std::int64_t k) const {
    if (curriculum.baseline) return curriculum.fixed_epsilon();
    return curriculum.schedule().precision_at(k);
  }

  bool operator==(const RunConfig&) const = default;
};

enum class Profile { Paper, Desk };

inline Profile profile_from_string(const std::string& s) {
  if (s == "paper") return Profile::Paper;
  if (s == "desk") return Profile::Desk;
  throw InvalidConfig("unknown profile '" + s + "' (expected paper or desk)");
}

// Full-scale hyperparameters.
inline RunConfig paper_profile(RewardMode reward) {
  RunConfig c;
  c.reward = reward;
  if (reward == RewardMode::Sparse) {
    c.curriculum.start = 0.25;
    c.curriculum.decay_epochs = 2500;
  }
  c.final_eval_epsilon = c.curriculum.end;
  return c;
}

// Scaled-down profile: three active joints (base, shoulder, elbow; the wrist
// joint 4 stays coupled, joints 5 and 6 are frozen), 64x64 networks and 600
// epochs. The base is limited to +-pi/3 around the start configuration,
// which keeps goals away from the pitch singularity at +-pi/2; shoulder and
// elbow get +-pi/2. Joint 4 is widened to +-2pi so the coupling rule is
// never clamped. Two updates per collected episode and a faster actor
// (1e-3) make up for the short run.
inline RunConfig desk_profile(RewardMode reward) {
  RunConfig c;
  c.reward = reward;
  c.agent.hidden = {64, 64};
  c.agent.actor_lr = 1e-3;
  c.epochs = 600;
  c.episodes_per_epoch = 10;
  c.steps_per_episode = 50;
  c.train_steps_per_epoch = 128;
  c.batch_size = 128;
  c.buffer_capacity = 1'000'000;
  c.curriculum.start = reward == RewardMode::Sparse ? 0.25 : 0.15;
  c.curriculum.end = 0.05;
  c.curriculum.decay_epochs = 400;
  c.curriculum.slope = 0.8;
  c.final_eval_epsilon = 0.05;

  const JointVector q0 = initial_joints();
  const double span[3] = {kPi / 3, kPi / 2, kPi / 2};
  for (std::size_t i = 0; i < 3; ++i) c.env.limits.joints[i] = {q0[i] - span[i], q0[i] + span[i]};
  c.env.limits.joints[3] = {-2 * kPi, 2 * kPi};
  for (std::size_t i = 4; i < kNumJoints; ++i) c.env.limits.joints[i] = {q0[i], q0[i]};
  return c;
}

inline RunConfig make_profile(Profile p, RewardMode reward) {
  return p == Profile::Paper ? paper_profile(reward) : desk_profile(reward);
}

// ---- JSON ----------------------------------------------------------------

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  json dh = json::array();
  for (const auto& r : c.env.chain.rows) dh.push_back({r.a, r.d, r.alpha, r.theta0});
  json limits = json::array();
  for (const auto& l : c.env.limits.joints) limits.push_back({l.lo, l.hi});
  json curriculum = {{"start", c.curriculum.start},
                     {"end", c.curriculum.end},
                     {"decay_epochs", c.curriculum.decay_epochs},
                     {"slope", c.curriculum.slope},
                     {"baseline", c.curriculum.baseline}};
  if (c.curriculum.baseline_epsilon) curriculum["baseline_epsilon"] = *c.curriculum.baseline_epsilon;
  return {
      {"reward", to_string(c.reward)},
      {"seed", c.seed},
      {"curriculum", curriculum},
      {"training",
       {{"epochs", c.epochs},
        {"episodes_per_epoch", c.episodes_per_epoch},
        {"steps_per_episode", c.steps_per_episode},
        {"train_steps_per_epoch", c.train_steps_per_epoch},
        {"batch_size", c.batch_size},
        {"buffer_capacity", c.buffer_capacity},
        {"checkpoint_every", c.checkpoint_every},
        {"save_buffer", c.save_buffer}}},
      {"agent",
       {{"hidden", c.agent.hidden},
        {"gamma", c.agent.gamma},
        {"tau", c.agent.tau},
        {"actor_lr", c.agent.actor_lr},
        {"critic_lr", c.agent.critic_lr},
        {"noise_sigma", c.agent.noise_sigma},
        {"explore_start", c.agent.explore_start},
        {"explore_end", c.agent.explore_end},
        {"actor_final_scale", c.agent.actor_final_scale},
        {"optimizer", to_string(c.agent.optimizer)}}},
      {"evaluation",
       {{"metrics_every", c.metrics_every},
        {"every", c.eval_every},
        {"goals", c.eval_goals},
        {"final_epsilon", c.final_eval_epsilon},
        {"final_goals", c.final_eval_goals},
        {"wall_clock_in_metrics", c.wall_clock_in_metrics}}},
      {"arm",
       {{"dh", dh},
        {"limits", limits},
        {"start", c.env.start.angles},
        {"weights", {{"position", c.env.weights.position}, {"orientation", c.env.weights.orientation}}}}},
  };
}

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw InvalidConfig("config: '" + where + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw InvalidConfig("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

// Overlays the fields present in `j` onto `base`.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  using detail::check_keys;
  using detail::read;
  RunConfig c = std::move(base);
  try {
    check_keys(j, "<root>", {"reward", "seed", "curriculum", "training", "agent", "evaluation", "arm"});
    if (j.contains("reward")) c.reward = reward_mode_from_string(j.at("reward").get<std::string>());
    read(j, "seed", c.seed);
    if (j.contains("curriculum")) {
      const auto& s = j.at("curriculum");
      check_keys(s, "curriculum", {"start", "end", "decay_epochs", "slope", "baseline", "baseline_epsilon"});
      read(s, "start", c.curriculum.start);
      read(s, "end", c.curriculum.end);
      read(s, "decay_epochs", c.curriculum.decay_epochs);
      read(s, "slope", c.curriculum.slope);
      read(s, "baseline", c.curriculum.baseline);
      if (s.contains("baseline_epsilon")) c.curriculum.baseline_epsilon = s.at("baseline_epsilon").get<double>();
    }
    if (j.contains("training")) {
      const auto& s = j.at("training");
      check_keys(s, "training", {"epochs", "episodes_per_epoch", "steps_per_episode", "train_steps_per_epoch",
                                 "batch_size", "buffer_capacity", "checkpoint_every", "save_buffer"});
      read(s, "epochs", c.epochs);
      read(s, "episodes_per_epoch", c.episodes_per_epoch);
      read(s, "steps_per_episode", c.steps_per_episode);
      read(s, "train_steps_per_epoch", c.train_steps_per_epoch);
      read(s, "batch_size", c.batch_size);
      read(s, "buffer_capacity", c.buffer_capacity);
      read(s, "checkpoint_every", c.checkpoint_every);
      read(s, "save_buffer", c.save_buffer);
    }
    if (j.contains("agent")) {
      const auto& s = j.at("agent");
      check_keys(s, "agent", {"hidden", "gamma", "tau", "actor_lr", "critic_lr", "noise_sigma", "explore_start",
                              "explore_end", "actor_final_scale", "optimizer"});
      read(s, "hidden", c.agent.hidden);
      read(s, "gamma", c.agent.gamma);
      read(s, "tau", c.agent.tau);
      read(s, "actor_lr", c.agent.actor_lr);
      read(s, "critic_lr", c.agent.critic_lr);
      read(s, "noise_sigma", c.agent.noise_sigma);
      read(s, "explore_start", c.agent.explore_start);
      read(s, "explore_end", c.agent.explore_end);
      read(s, "actor_final_scale", c.agent.actor_final_scale);
      if (s.contains("optimizer")) c.agent.optimizer = optimizer_from_string(s.at("optimizer").get<std::string>());
    }
    if (j.contains("evaluation")) {
      const auto& s = j.at("evaluation");
      check_keys(s, "evaluation",
                 {"metrics_every", "every", "goals", "final_epsilon", "final_goals", "wall_clock_in_metrics"});
      read(s, "metrics_every", c.metrics_every);
      read(s, "every", c.eval_every);
      read(s, "goals", c.eval_goals);
      read(s, "final_epsilon", c.final_eval_epsilon);
      read(s, "final_goals", c.final_eval_goals);
      read(s, "wall_clock_in_metrics", c.wall_clock_in_metrics);
    }
    if (j.contains("arm")) {
      const auto& s = j.at("arm");
      check_keys(s, "arm", {"dh", "limits", "start", "weights"});
      if (s.contains("dh")) {
        const auto rows = s.at("dh").get<std::vector<std::vector<double>>>();
        if (rows.size() != kNumJoints) throw InvalidConfig("config: arm.dh must have 6 rows");
        for (std::size_t i = 0; i < kNumJoints; ++i) {
          if (rows[i].size() != 4) throw InvalidConfig("config: arm.dh rows are [a, d, alpha, theta0]");
          c.env.chain.rows[i] = {rows[i][0], rows[i][1], rows[i][2], rows[i][3]};
        }
      }
      if (s.contains("limits")) {
        const auto rows = s.at("limits").get<std::vector<std::vector<double>>>();
        if (rows.size() != kNumJoints) throw InvalidConfig("config: arm.limits must have 6 rows");
        for (std::size_t i = 0; i < kNumJoints; ++i) {
          if (rows[i].size() != 2) throw InvalidConfig("config: arm.limits rows are [lo, hi]");
          c.env.limits.joints[i] = {rows[i][0], rows[i][1]};
        }
      }
      if (s.contains("start")) {
        const auto q = s.at("start").get<std::vector<double>>();
        if (q.size() != kNumJoints) throw InvalidConfig("config: arm.start must have 6 angles");
        for (std::size_t i = 0; i < kNumJoints; ++i) c.env.start[i] = q[i];
      }
      if (s.contains("weights")) {
        const auto& w = s.at("weights");
        check_keys(w, "arm.weights", {"position", "orientation"});
        read(w, "position", c.env.weights.position);
        read(w, "orientation", c.env.weights.orientation);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, std::move(base));
}

// 64-bit FNV-1a over the canonical JSON dump.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

// Hash of everything except the curriculum block; the two arms of a
// comparison must agree on it.
inline std::uint64_t shared_config_hash(const RunConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("curriculum");
  j.erase("seed");
  return fnv1a(j.dump());
}

}  // namespace pccl
