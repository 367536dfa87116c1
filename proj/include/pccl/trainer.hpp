#pragma once

// Training loop (epochs of rollouts followed by batched updates), the
// noise-free evaluation protocol, metrics emission and checkpointing.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <json.hpp>  // nlohmann/json (vendored)

#include "pccl/agent.hpp"
#include "pccl/config.hpp"
#include "pccl/environment.hpp"
#include "pccl/errors.hpp"
#include "pccl/neural.hpp"

namespace pccl {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "pccl-checkpoint";
inline constexpr const char* kMetricsHeader = "epoch,epsilon,acc_steps,eval_success,mean_reward,wall_s";

struct MetricsRecord {
  std::int64_t epoch = 0;
  double epsilon = 0.0;
  std::int64_t acc_steps = 0;
  std::optional<double> eval_success;
  double mean_reward = 0.0;
  std::optional<double> wall_s;

  bool operator==(const MetricsRecord&) const = default;
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string metrics_csv(const std::vector<MetricsRecord>& records) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << format_double(r.epsilon) << ',' << r.acc_steps << ','
        << (r.eval_success ? format_double(*r.eval_success) : "") << ',' << format_double(r.mean_reward)
        << ',' << (r.wall_s ? format_double(*r.wall_s) : "") << '\n';
  }
  return out.str();
}

// Independent, reproducible random stream `stream` derived from `seed`.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedU};
  return std::mt19937_64(seq);
}

enum StreamId : std::uint64_t { kInitStream = 1, kTrainStream = 2, kEvalStream = 3, kFinalEvalStream = 4 };

// ---- evaluation ------------------------------------------------------------

// Runs `n_goals` noise-free episodes from the initial configuration and
// returns the fraction that reach their goal within `max_steps`. A policy is
// called as policy(state, goal), or policy(state, goal, goal_joints) when it
// accepts the goal's generating configuration (scripted oracles).
template <typename Policy>
double evaluate(Policy&& policy, const ReachEnv& env, int n_goals, double epsilon, int max_steps,
                std::mt19937_64& rng) {
  if (n_goals < 1) throw InvalidInput("evaluate: n_goals must be >= 1");
  int successes = 0;
  for (int g = 0; g < n_goals; ++g) {
    JointVector goal_joints;
    auto [state, goal] = env.reset(rng, epsilon, &goal_joints);
    for (int t = 0; t < max_steps; ++t) {
      Action a;
      if constexpr (std::is_invocable_r_v<Action, Policy, const State&, const AugmentedGoal&,
                                          const JointVector&>) {
        a = policy(state, goal, goal_joints);
      } else {
        a = policy(state, goal);
      }
      const StepResult r = env.step(state, a, goal);
      state = r.next_state;
      if (r.success) {
        ++successes;
        break;
      }
    }
  }
  return static_cast<double>(successes) / n_goals;
}

// Immutable copy of an actor used for evaluation.
class PolicySnapshot {
 public:
  explicit PolicySnapshot(Mlp actor) : actor_(std::move(actor)) {}
  Action operator()(const State& s, const AugmentedGoal& g) const { return DdpgAgent::policy_of(actor_, s, g); }
  const Mlp& actor() const { return actor_; }

 private:
  Mlp actor_;
};

// Drives the arm straight to the goal's generating configuration.
struct GoalReplayPolicy {
  Action operator()(const State& s, const AugmentedGoal&, const JointVector& target) const {
    Action a;
    for (std::size_t i = 0; i < kNumJoints; ++i) {
      a[i] = std::clamp((target[i] - s.joints[i]) / kMaxJointIncrement, -1.0, 1.0);
    }
    return a;
  }
};

struct ZeroPolicy {
  Action operator()(const State&, const AugmentedGoal&) const { return Action{}; }
};

// One step per row: step,j1..j6,x,y,z,rx,ry,rz,reward,done.
template <typename Policy>
std::string episode_trace_csv(Policy&& policy, const ReachEnv& env, double epsilon, int max_steps,
                              std::mt19937_64& rng) {
  std::ostringstream out;
  out << "step,j1,j2,j3,j4,j5,j6,x,y,z,rx,ry,rz,reward,done\n";
  auto [state, goal] = env.reset(rng, epsilon);
  auto emit = [&](int step, const State& s, double reward, bool done) {
    out << step;
    for (std::size_t i = 0; i < kNumJoints; ++i) out << ',' << format_double(s.joints[i]);
    for (double v : s.pose.flat()) out << ',' << format_double(v);
    out << ',' << format_double(reward) << ',' << (done ? 1 : 0) << '\n';
  };
  emit(0, state, 0.0, false);
  for (int t = 1; t <= max_steps; ++t) {
    const StepResult r = env.step(state, policy(state, goal), goal);
    state = r.next_state;
    emit(t, state, r.reward, r.done);
    if (r.done) break;
  }
  return out.str();
}

// ---- binary replay-buffer sidecar -----------------------------------------

namespace detail {

inline constexpr std::uint64_t kBufferMagic = 0x31464255424c4350ULL;  // "PCLBUF1"
inline constexpr std::size_t kTransitionDoubles = 12 + 6 + 12 + 1 + 7 + 1;

inline void write_buffer(const std::string& path, const ReplayBuffer& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write replay buffer file '" + path + "'");
  const std::uint64_t header[4] = {kBufferMagic, buf.capacity(), buf.size(), buf.cursor()};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  std::vector<double> row(kTransitionDoubles);
  for (const Transition& t : buf.storage()) {
    auto it = row.begin();
    it = std::copy(t.state.begin(), t.state.end(), it);
    it = std::copy(t.action.begin(), t.action.end(), it);
    it = std::copy(t.next_state.begin(), t.next_state.end(), it);
    *it++ = t.reward;
    it = std::copy(t.goal.begin(), t.goal.end(), it);
    *it = t.terminal ? 1.0 : 0.0;
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!out) throw Error("failed writing replay buffer file '" + path + "'");
}

inline ReplayBuffer read_buffer(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open replay buffer file '" + path + "'");
  std::uint64_t header[4];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || header[0] != kBufferMagic) throw LoadError("replay buffer file is corrupt");
  ReplayBuffer buf(header[1]);
  std::vector<Transition> data(header[2]);
  std::vector<double> row(kTransitionDoubles);
  for (Transition& t : data) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!in) throw LoadError("replay buffer file is truncated");
    auto it = row.begin();
    std::copy(it, it + 12, t.state.begin());
    it += 12;
    std::copy(it, it + 6, t.action.begin());
    it += 6;
    std::copy(it, it + 12, t.next_state.begin());
    it += 12;
    t.reward = *it++;
    std::copy(it, it + 7, t.goal.begin());
    it += 7;
    t.terminal = *it != 0.0;
  }
  buf.restore(std::move(data), header[3]);
  return buf;
}

inline std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

inline std::mt19937_64 rng_from_string(const std::string& s) {
  std::istringstream in(s);
  std::mt19937_64 rng;
  in >> rng;
  if (!in) throw LoadError("corrupt random-stream state");
  return rng;
}

inline nlohmann::json record_to_json(const MetricsRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch}, {"epsilon", r.epsilon}, {"acc_steps", r.acc_steps},
                      {"mean_reward", r.mean_reward}};
  j["eval_success"] = r.eval_success ? nlohmann::json(*r.eval_success) : nlohmann::json(nullptr);
  j["wall_s"] = r.wall_s ? nlohmann::json(*r.wall_s) : nlohmann::json(nullptr);
  return j;
}

inline MetricsRecord record_from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.epoch = j.at("epoch").get<std::int64_t>();
  r.epsilon = j.at("epsilon").get<double>();
  r.acc_steps = j.at("acc_steps").get<std::int64_t>();
  r.mean_reward = j.at("mean_reward").get<double>();
  if (!j.at("eval_success").is_null()) r.eval_success = j.at("eval_success").get<double>();
  if (!j.at("wall_s").is_null()) r.wall_s = j.at("wall_s").get<double>();
  return r;
}

}  // namespace detail

// ---- trainer ---------------------------------------------------------------

struct EpochSummary {
  std::int64_t epoch = 0;
  double epsilon = 0.0;
  std::int64_t steps = 0;
  int episodes = 0;
  int successes = 0;
  double reward_sum = 0.0;
  std::optional<MetricsRecord> record;
};

class Trainer {
 public:
  explicit Trainer(RunConfig config)
      : config_((config.validate(), std::move(config))),
        env_(config_.env, config_.reward),
        agent_(make_agent(config_)),
        buffer_(config_.buffer_capacity),
        train_rng_(make_stream(config_.seed, kTrainStream)),
        eval_rng_(make_stream(config_.seed, kEvalStream)) {}

  const RunConfig& config() const { return config_; }
  const ReachEnv& env() const { return env_; }
  const DdpgAgent& agent() const { return agent_; }
  DdpgAgent& mutable_agent() { return agent_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const std::vector<MetricsRecord>& metrics() const { return metrics_; }
  std::int64_t next_epoch() const { return next_epoch_; }
  std::int64_t accumulated_steps() const { return acc_steps_; }
  bool finished() const { return next_epoch_ >= config_.epochs; }
  bool resumed_without_buffer() const { return resumed_without_buffer_; }
  double wall_seconds() const { return wall_offset_ + elapsed(); }

  PolicySnapshot snapshot() const { return PolicySnapshot(agent_.actor()); }

  // Noise-free evaluation on the trainer's own evaluation stream.
  double evaluate_current(double epsilon, int n_goals) {
    return evaluate(snapshot(), env_, n_goals, epsilon, config_.steps_per_episode, eval_rng_);
  }

  // Runs one epoch: M exploratory episodes, then K batched updates.
  EpochSummary run_epoch() {
    if (finished()) throw Error("run_epoch: all configured epochs are done");
    if (!clock_started_) start_clock();
    EpochSummary s;
    s.epoch = next_epoch_;
    s.epsilon = config_.epsilon_at(s.epoch);
    agent_.set_explore_probability(exploration_probability(config_.agent, s.epoch, config_.epochs));

    for (int m = 0; m < config_.episodes_per_epoch; ++m) {
      auto [state, goal] = env_.reset(train_rng_, s.epsilon);
      const auto goal_flat = goal.flat();
      double ret = 0.0;
      for (int t = 0; t < config_.steps_per_episode; ++t) {
        const Action a = agent_.select_action(state, goal, train_rng_, true);
        const StepResult r = env_.step(state, a, goal);
        buffer_.push(Transition{state.flat(), a.a, r.next_state.flat(), r.reward, goal_flat, r.success});
        ret += r.reward;
        ++s.steps;
        state = r.next_state;
        if (r.done) {
          ++s.successes;
          break;
        }
      }
      ++s.episodes;
      s.reward_sum += ret;
    }
    acc_steps_ += s.steps;
    pending_episodes_ += s.episodes;
    pending_reward_ += s.reward_sum;

    for (int k = 0; k < config_.train_steps_per_epoch; ++k) {
      const auto batch = buffer_.sample(train_rng_, static_cast<std::size_t>(config_.batch_size));
      agent_.train_step(batch);
    }

    const bool last = s.epoch + 1 == config_.epochs;
    if ((s.epoch + 1) % config_.metrics_every == 0 || last) {
      MetricsRecord rec;
      rec.epoch = s.epoch;
      rec.epsilon = s.epsilon;
      rec.acc_steps = acc_steps_;
      rec.mean_reward = pending_episodes_ > 0 ? pending_reward_ / pending_episodes_ : 0.0;
      if ((s.epoch + 1) % config_.eval_every == 0 || last) {
        rec.eval_success = evaluate_current(s.epsilon, config_.eval_goals);
      }
      if (config_.wall_clock_in_metrics) rec.wall_s = wall_seconds();
      metrics_.push_back(rec);
      timings_.emplace_back(s.epoch, wall_seconds());
      pending_episodes_ = 0;
      pending_reward_ = 0.0;
      s.record = rec;
    }
    ++next_epoch_;
    return s;
  }

  // Elapsed wall time per metrics record (kept out of the metrics file so
  // the latter stays reproducible).
  const std::vector<std::pair<std::int64_t, double>>& timings() const { return timings_; }

  // ---- checkpoints ----

  nlohmann::json checkpoint_document(bool include_buffer, const std::string& buffer_file) const {
    nlohmann::json metrics = nlohmann::json::array();
    for (const auto& r : metrics_) metrics.push_back(detail::record_to_json(r));
    nlohmann::json timings = nlohmann::json::array();
    for (const auto& [e, w] : timings_) timings.push_back({e, w});
    return {
        {"format", kCheckpointFormat},
        {"version", kCheckpointVersion},
        {"config", to_json(config_)},
        {"next_epoch", next_epoch_},
        {"acc_steps", acc_steps_},
        {"pending_episodes", pending_episodes_},
        {"pending_reward", pending_reward_},
        {"wall_s", wall_seconds()},
        {"train_rng", detail::rng_to_string(train_rng_)},
        {"eval_rng", detail::rng_to_string(eval_rng_)},
        {"metrics", metrics},
        {"timings", timings},
        {"resumed_without_buffer", resumed_without_buffer_},
        {"agent",
         {{"actor", to_json(agent_.actor())},
          {"critic", to_json(agent_.critic())},
          {"target_actor", to_json(agent_.target_actor())},
          {"target_critic", to_json(agent_.target_critic())},
          {"actor_optimizer", to_json(agent_.actor_optimizer())},
          {"critic_optimizer", to_json(agent_.critic_optimizer())},
          {"explore_probability", agent_.explore_probability()}}},
        {"buffer",
         {{"capacity", buffer_.capacity()},
          {"size", buffer_.size()},
          {"cursor", buffer_.cursor()},
          {"included", include_buffer},
          {"file", include_buffer ? nlohmann::json(buffer_file) : nlohmann::json(nullptr)}}},
    };
  }

  // Writes `path` (JSON) and, when `include_buffer`, `path + ".buffer"`.
  void save_checkpoint(const std::string& path, bool include_buffer) const {
    const std::filesystem::path p(path);
    const std::string buffer_name = p.filename().string() + ".buffer";
    if (include_buffer) detail::write_buffer((p.parent_path() / buffer_name).string(), buffer_);
    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw Error("cannot write checkpoint '" + path + "'");
      out << checkpoint_document(include_buffer, buffer_name).dump();
      if (!out) throw Error("failed writing checkpoint '" + path + "'");
    }
    std::filesystem::rename(tmp, path);
  }

  // Restores a trainer from a checkpoint. Without a saved buffer the run
  // resumes with an empty replay buffer and is flagged as such.
  static Trainer load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open checkpoint '" + path + "'");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("checkpoint '" + path + "' is corrupt: " + e.what());
    }
    try {
      if (doc.at("format").get<std::string>() != kCheckpointFormat) throw LoadError("not a checkpoint file");
      const int version = doc.at("version").get<int>();
      if (version != kCheckpointVersion) {
        throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kCheckpointVersion) + ")");
      }
      Trainer t(run_config_from_json(doc.at("config")));
      const auto& a = doc.at("agent");
      DdpgAgent& agent = t.agent_;
      agent.mutable_actor() = mlp_from_json(a.at("actor"));
      agent.mutable_critic() = mlp_from_json(a.at("critic"));
      agent.mutable_target_actor() = mlp_from_json(a.at("target_actor"));
      agent.mutable_target_critic() = mlp_from_json(a.at("target_critic"));
      if (!agent.actor().same_architecture(t.agent_.target_actor()) ||
          agent.actor().input_width() != kActorInputSize || agent.critic().input_width() != kCriticInputSize) {
        throw LoadError("checkpoint networks do not match the configured architecture");
      }
      agent.mutable_actor_optimizer() = adam_from_json(a.at("actor_optimizer"), agent.actor());
      agent.mutable_critic_optimizer() = adam_from_json(a.at("critic_optimizer"), agent.critic());
      agent.set_explore_probability(a.at("explore_probability").get<double>());

      t.next_epoch_ = doc.at("next_epoch").get<std::int64_t>();
      t.acc_steps_ = doc.at("acc_steps").get<std::int64_t>();
      t.pending_episodes_ = doc.at("pending_episodes").get<std::int64_t>();
      t.pending_reward_ = doc.at("pending_reward").get<double>();
      t.wall_offset_ = doc.at("wall_s").get<double>();
      t.train_rng_ = detail::rng_from_string(doc.at("train_rng").get<std::string>());
      t.eval_rng_ = detail::rng_from_string(doc.at("eval_rng").get<std::string>());
      for (const auto& r : doc.at("metrics")) t.metrics_.push_back(detail::record_from_json(r));
      for (const auto& e : doc.at("timings")) t.timings_.emplace_back(e.at(0).get<std::int64_t>(), e.at(1).get<double>());
      t.resumed_without_buffer_ = doc.at("resumed_without_buffer").get<bool>();

      const auto& b = doc.at("buffer");
      if (b.at("included").get<bool>()) {
        const auto file = std::filesystem::path(path).parent_path() / b.at("file").get<std::string>();
        ReplayBuffer buf = detail::read_buffer(file.string());
        if (buf.size() != b.at("size").get<std::size_t>() || buf.cursor() != b.at("cursor").get<std::size_t>() ||
            buf.capacity() != t.config_.buffer_capacity) {
          throw LoadError("replay buffer file does not match checkpoint metadata");
        }
        t.buffer_ = std::move(buf);
      } else if (b.at("size").get<std::size_t>() > 0) {
        t.resumed_without_buffer_ = true;
      }
      return t;
    } catch (const nlohmann::json::exception& e) {
      throw LoadError("checkpoint '" + path + "' is malformed: " + e.what());
    } catch (const InvalidConfig& e) {
      throw LoadError("checkpoint '" + path + "' holds an invalid config: " + e.what());
    }
  }

 private:
  static DdpgAgent make_agent(const RunConfig& c) {
    std::mt19937_64 init = make_stream(c.seed, kInitStream);
    return DdpgAgent(c.agent, init);
  }

  void start_clock() {
    clock_start_ = std::chrono::steady_clock::now();
    clock_started_ = true;
  }

  double elapsed() const {
    if (!clock_started_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start_).count();
  }

  RunConfig config_;
  ReachEnv env_;
  DdpgAgent agent_;
  ReplayBuffer buffer_;
  std::mt19937_64 train_rng_;
  std::mt19937_64 eval_rng_;
  std::int64_t next_epoch_ = 0;
  std::int64_t acc_steps_ = 0;
  std::int64_t pending_episodes_ = 0;
  double pending_reward_ = 0.0;
  std::vector<MetricsRecord> metrics_;
  std::vector<std::pair<std::int64_t, double>> timings_;
  bool resumed_without_buffer_ = false;
  double wall_offset_ = 0.0;
  bool clock_started_ = false;
  std::chrono::steady_clock::time_point clock_start_{};
};

// ---- run orchestration -----------------------------------------------------

struct RunResult {
  std::vector<MetricsRecord> metrics;
  std::int64_t total_steps = 0;
  double wall_s = 0.0;
  std::string checkpoint_path;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_run_files(const Trainer& t, const std::filesystem::path& out_dir) {
  write_text_file(out_dir / "metrics.csv", metrics_csv(t.metrics()));
  std::ostringstream timing;
  timing << "epoch,wall_s\n";
  for (const auto& [e, w] : t.timings()) timing << e << ',' << format_double(w) << '\n';
  write_text_file(out_dir / "timing.csv", timing.str());
  nlohmann::json info = {{"config", to_json(t.config())},
                         {"epochs_completed", t.next_epoch()},
                         {"acc_steps", t.accumulated_steps()},
                         {"resumed_without_buffer", t.resumed_without_buffer()}};
  write_text_file(out_dir / "run_info.json", info.dump(2) + "\n");
}

// Trains to completion, writing metrics.csv, timing.csv, run_info.json and
// checkpoint.json under `out_dir`. On divergence the most recent periodic
// checkpoint is left in place and the error is rethrown.
inline RunResult train(Trainer& trainer, const std::filesystem::path& out_dir,
                       const std::function<void(const EpochSummary&)>& on_epoch = {}) {
  std::filesystem::create_directories(out_dir);
  const RunConfig& cfg = trainer.config();
  const std::string ckpt = (out_dir / "checkpoint.json").string();
  try {
    while (!trainer.finished()) {
      const EpochSummary s = trainer.run_epoch();
      if (on_epoch) on_epoch(s);
      if (cfg.checkpoint_every > 0 && trainer.next_epoch() % cfg.checkpoint_every == 0 && !trainer.finished()) {
        trainer.save_checkpoint(ckpt, cfg.save_buffer);
        write_run_files(trainer, out_dir);
      }
    }
  } catch (const TrainingDivergence&) {
    write_run_files(trainer, out_dir);
    throw;
  }
  trainer.save_checkpoint(ckpt, cfg.save_buffer);
  write_run_files(trainer, out_dir);
  return {trainer.metrics(), trainer.accumulated_steps(), trainer.wall_seconds(), ckpt};
}

inline RunResult train(const RunConfig& config, const std::filesystem::path& out_dir,
                       const std::function<void(const EpochSummary&)>& on_epoch = {}) {
  Trainer trainer(config);
  return train(trainer, out_dir, on_epoch);
}

// ---- curriculum comparison -------------------------------------------------

struct ArmResult {
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> metrics;
  std::int64_t total_steps = 0;
  double final_success = 0.0;
  double wall_s = 0.0;
};

struct ComparisonReport {
  std::uint64_t pccl_hash = 0;
  std::uint64_t baseline_hash = 0;
  double final_epsilon = 0.0;
  std::vector<ArmResult> pccl;
  std::vector<ArmResult> baseline;
};

// Final head-to-head evaluation at the shared final precision, on a stream
// that depends only on the seed so both arms see the same goals.
inline double final_evaluation(const Trainer& t) {
  std::mt19937_64 rng = make_stream(t.config().seed, kFinalEvalStream);
  return evaluate(t.snapshot(), t.env(), t.config().final_eval_goals, t.config().final_eval_epsilon,
                  t.config().steps_per_episode, rng);
}

inline ArmResult run_arm(RunConfig cfg, std::uint64_t seed, const std::optional<std::filesystem::path>& dir,
                         const std::function<void(const EpochSummary&)>& on_epoch = {}) {
  cfg.seed = seed;
  Trainer t(cfg);
  ArmResult r;
  r.seed = seed;
  if (dir) {
    const RunResult rr = train(t, *dir, on_epoch);
    r.total_steps = rr.total_steps;
    r.wall_s = rr.wall_s;
  } else {
    while (!t.finished()) {
      const EpochSummary s = t.run_epoch();
      if (on_epoch) on_epoch(s);
    }
    r.total_steps = t.accumulated_steps();
    r.wall_s = t.wall_seconds();
  }
  r.metrics = t.metrics();
  r.final_success = final_evaluation(t);
  return r;
}

inline std::string arm_csv(const std::vector<ArmResult>& arm) {
  std::ostringstream out;
  out << "seed," << kMetricsHeader << '\n';
  for (const auto& r : arm) {
    std::istringstream rows(metrics_csv(r.metrics));
    std::string line;
    std::getline(rows, line);  // header
    while (std::getline(rows, line)) out << r.seed << ',' << line << '\n';
  }
  return out.str();
}

inline std::string summary_csv(const ComparisonReport& rep) {
  std::ostringstream out;
  out << "arm,seed,config_hash,final_epsilon,final_success,total_steps,wall_s\n";
  auto rows = [&](const char* name, std::uint64_t hash, const std::vector<ArmResult>& arm) {
    for (const auto& r : arm) {
      out << name << ',' << r.seed << ',' << hash << ',' << format_double(rep.final_epsilon) << ','
          << format_double(r.final_success) << ',' << r.total_steps << ',' << format_double(r.wall_s) << '\n';
    }
  };
  rows("pccl", rep.pccl_hash, rep.pccl);
  rows("baseline", rep.baseline_hash, rep.baseline);
  return out.str();
}

// Trains both arms for every seed. With `out_dir` set, per-run outputs go to
// out_dir/{pccl,baseline}/seed_<n>/ and the report to pccl.csv,
// baseline.csv and summary.csv.
inline ComparisonReport compare(const RunConfig& pccl_cfg, const RunConfig& baseline_cfg,
                                const std::vector<std::uint64_t>& seeds,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                const std::function<void(const std::string&, std::uint64_t, const EpochSummary&)>&
                                    on_epoch = {}) {
  if (pccl_cfg.curriculum.baseline || !baseline_cfg.curriculum.baseline) {
    throw InvalidConfig("compare: expected a curriculum arm and a baseline arm");
  }
  ComparisonReport rep;
  rep.pccl_hash = shared_config_hash(pccl_cfg);
  rep.baseline_hash = shared_config_hash(baseline_cfg);
  if (rep.pccl_hash != rep.baseline_hash) {
    throw InvalidConfig("compare: arms differ outside the curriculum settings");
  }
  rep.final_epsilon = pccl_cfg.final_eval_epsilon;
  for (std::uint64_t seed : seeds) {
    for (int arm = 0; arm < 2; ++arm) {
      const char* name = arm == 0 ? "pccl" : "baseline";
      std::optional<std::filesystem::path> dir;
      if (out_dir) dir = *out_dir / name / ("seed_" + std::to_string(seed));
      auto cb = [&](const EpochSummary& s) {
        if (on_epoch) on_epoch(name, seed, s);
      };
      ArmResult r = run_arm(arm == 0 ? pccl_cfg : baseline_cfg, seed, dir, cb);
      (arm == 0 ? rep.pccl : rep.baseline).push_back(std::move(r));
    }
  }
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_text_file(*out_dir / "pccl.csv", arm_csv(rep.pccl));
    write_text_file(*out_dir / "baseline.csv", arm_csv(rep.baseline));
    write_text_file(*out_dir / "summary.csv", summary_csv(rep));
  }
  return rep;
}

}  // namespace pccl
