#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pccl/trainer.hpp"

using namespace pccl;
namespace fs = std::filesystem;

namespace {

RunConfig tiny(RewardMode reward = RewardMode::Sparse) {
  RunConfig c = desk_profile(reward);
  c.agent.hidden = {8, 8};
  c.epochs = 6;
  c.episodes_per_epoch = 2;
  c.steps_per_episode = 10;
  c.train_steps_per_epoch = 4;
  c.batch_size = 16;
  c.buffer_capacity = 1000;
  c.curriculum.decay_epochs = 4;
  c.metrics_every = 1;
  c.eval_every = 2;
  c.eval_goals = 5;
  c.final_eval_goals = 5;
  return c;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("pccl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void expect_same_params(const Mlp& a, const Mlp& b) {
  EXPECT_EQ(oracle::max_relative_error(a.parameters(), b.parameters(), 1.0), 0.0);
}

}  // namespace

TEST(Trainer, SingleStepEpochStoresOneTransitionAndKeepsParameters) {
  RunConfig c = tiny();
  c.epochs = 1;
  c.episodes_per_epoch = 1;
  c.steps_per_episode = 1;
  c.train_steps_per_epoch = 0;
  Trainer t(c);
  const Trainer fresh(c);
  t.run_epoch();
  EXPECT_EQ(t.buffer().size(), 1u);
  EXPECT_EQ(t.accumulated_steps(), 1);
  EXPECT_TRUE(t.finished());
  expect_same_params(t.agent().actor(), fresh.agent().actor());
  expect_same_params(t.agent().critic(), fresh.agent().critic());
  ASSERT_EQ(t.metrics().size(), 1u);
  EXPECT_TRUE(t.metrics()[0].eval_success.has_value());
}

TEST(Trainer, StoredGoalCarriesCollectionPrecision) {
  RunConfig c = tiny();
  c.train_steps_per_epoch = 0;
  Trainer t(c);
  for (int e = 0; e < 3; ++e) {
    const std::size_t before = t.buffer().size();
    const EpochSummary s = t.run_epoch();
    for (std::size_t i = before; i < t.buffer().size(); ++i) EXPECT_EQ(t.buffer().storage()[i].goal[6], s.epsilon);
  }
}

TEST(Trainer, BaselineKeepsPrecisionFixed) {
  RunConfig c = tiny();
  c.curriculum.baseline = true;
  Trainer t(c);
  while (!t.finished()) t.run_epoch();
  for (const auto& r : t.metrics()) EXPECT_EQ(r.epsilon, c.curriculum.end);
}

TEST(Trainer, CurriculumFollowsSchedule) {
  const RunConfig c = tiny();
  Trainer t(c);
  while (!t.finished()) t.run_epoch();
  const DecaySchedule s = c.curriculum.schedule();
  for (const auto& r : t.metrics()) EXPECT_EQ(r.epsilon, s.precision_at(r.epoch));
}

TEST(Trainer, MetricsAreByteIdenticalAcrossRuns) {
  const RunConfig c = tiny(RewardMode::Dense);
  Trainer a(c), b(c);
  while (!a.finished()) a.run_epoch();
  while (!b.finished()) b.run_epoch();
  EXPECT_EQ(metrics_csv(a.metrics()), metrics_csv(b.metrics()));
}

TEST(Trainer, DifferentSeedsDiffer) {
  RunConfig c = tiny(RewardMode::Dense);
  Trainer a(c);
  c.seed = 2;
  Trainer b(c);
  while (!a.finished()) a.run_epoch();
  while (!b.finished()) b.run_epoch();
  EXPECT_NE(metrics_csv(a.metrics()), metrics_csv(b.metrics()));
}

TEST(Trainer, AccumulatedStepsInvariants) {
  const RunConfig c = tiny();
  Trainer t(c);
  std::int64_t prev = 0;
  while (!t.finished()) {
    const EpochSummary s = t.run_epoch();
    EXPECT_GE(s.steps, s.episodes);
    EXPECT_LE(s.steps, static_cast<std::int64_t>(s.episodes) * c.steps_per_episode);
    EXPECT_EQ(t.accumulated_steps(), prev + s.steps);
    prev = t.accumulated_steps();
  }
  EXPECT_EQ(t.buffer().size(), static_cast<std::size_t>(t.accumulated_steps()));
  for (std::size_t i = 1; i < t.metrics().size(); ++i) {
    EXPECT_GE(t.metrics()[i].acc_steps, t.metrics()[i - 1].acc_steps);
  }
}

TEST(Trainer, SparseMeanRewardWithinCodomain) {
  const RunConfig c = tiny();
  Trainer t(c);
  while (!t.finished()) t.run_epoch();
  for (const auto& r : t.metrics()) {
    EXPECT_GE(r.mean_reward, -0.02 * c.steps_per_episode - 1e-12);
    EXPECT_LE(r.mean_reward, 1.0);
  }
}

TEST(Trainer, WallClockOnlyWhenRequested) {
  RunConfig c = tiny();
  c.epochs = 2;
  Trainer a(c);
  while (!a.finished()) a.run_epoch();
  for (const auto& r : a.metrics()) EXPECT_FALSE(r.wall_s.has_value());
  EXPECT_EQ(a.timings().size(), a.metrics().size());
  c.wall_clock_in_metrics = true;
  Trainer b(c);
  while (!b.finished()) b.run_epoch();
  for (const auto& r : b.metrics()) EXPECT_TRUE(r.wall_s.has_value());
}

TEST(Evaluate, GoalReplayScoresOne) {
  const ReachEnv env(EnvConfig{}, RewardMode::Sparse);
  std::mt19937_64 rng(1);
  EXPECT_EQ(evaluate(GoalReplayPolicy{}, env, 100, 0.01, 50, rng), 1.0);
}

TEST(Evaluate, ZeroPolicyScoresZero) {
  const ReachEnv env(EnvConfig{}, RewardMode::Sparse);
  std::mt19937_64 rng(1);
  EXPECT_EQ(evaluate(ZeroPolicy{}, env, 100, 0.01, 50, rng), 0.0);
}

TEST(Evaluate, DeterministicForSameStream) {
  const Trainer t(tiny());
  const ReachEnv env = t.env();
  std::mt19937_64 a(3), b(3);
  const auto p = t.snapshot();
  EXPECT_EQ(evaluate(p, env, 20, 0.2, 10, a), evaluate(p, env, 20, 0.2, 10, b));
}

TEST(Evaluate, RejectsNoGoals) {
  const ReachEnv env(EnvConfig{}, RewardMode::Sparse);
  std::mt19937_64 rng(1);
  EXPECT_THROW(evaluate(ZeroPolicy{}, env, 0, 0.01, 50, rng), InvalidInput);
}

TEST(EpisodeTrace, HasHeaderAndRows) {
  const ReachEnv env(EnvConfig{}, RewardMode::Dense);
  std::mt19937_64 rng(2);
  const std::string csv = episode_trace_csv(ZeroPolicy{}, env, 0.05, 3, rng);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,j1,j2,j3,j4,j5,j6,x,y,z,rx,ry,rz,reward,done");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

TEST(Checkpoint, ResumedRunMatchesUninterrupted) {
  TempDir dir;
  const RunConfig c = tiny(RewardMode::Dense);
  Trainer full(c);
  for (int e = 0; e < 3; ++e) full.run_epoch();
  const std::string path = (dir.path() / "ckpt.json").string();
  full.save_checkpoint(path, true);
  Trainer resumed = Trainer::load_checkpoint(path);
  EXPECT_FALSE(resumed.resumed_without_buffer());
  EXPECT_EQ(resumed.next_epoch(), 3);
  EXPECT_EQ(resumed.buffer().storage(), full.buffer().storage());
  expect_same_params(resumed.agent().actor(), full.agent().actor());
  expect_same_params(resumed.agent().target_critic(), full.agent().target_critic());
  while (!full.finished()) full.run_epoch();
  while (!resumed.finished()) resumed.run_epoch();
  EXPECT_EQ(metrics_csv(resumed.metrics()), metrics_csv(full.metrics()));
  expect_same_params(resumed.agent().critic(), full.agent().critic());
}

TEST(Checkpoint, WithoutBufferIsFlagged) {
  TempDir dir;
  Trainer t(tiny());
  t.run_epoch();
  const std::string path = (dir.path() / "ckpt.json").string();
  t.save_checkpoint(path, false);
  EXPECT_FALSE(fs::exists(path + ".buffer"));
  const Trainer r = Trainer::load_checkpoint(path);
  EXPECT_TRUE(r.resumed_without_buffer());
  EXPECT_EQ(r.buffer().size(), 0u);
}

TEST(Checkpoint, UnknownVersionIsRejected) {
  TempDir dir;
  const Trainer t(tiny());
  nlohmann::json doc = t.checkpoint_document(false, "");
  doc["version"] = kCheckpointVersion + 1;
  const fs::path path = dir.path() / "ckpt.json";
  write_text_file(path, doc.dump());
  EXPECT_THROW(Trainer::load_checkpoint(path.string()), VersionError);
}

TEST(Checkpoint, CorruptFileIsLoadError) {
  TempDir dir;
  const fs::path path = dir.path() / "ckpt.json";
  write_text_file(path, "{\"format\": \"pccl-checkpoint\", ");
  EXPECT_THROW(Trainer::load_checkpoint(path.string()), LoadError);
  EXPECT_THROW(Trainer::load_checkpoint((dir.path() / "missing.json").string()), LoadError);
}

TEST(Checkpoint, TruncatedBufferIsLoadError) {
  TempDir dir;
  Trainer t(tiny());
  t.run_epoch();
  const std::string path = (dir.path() / "ckpt.json").string();
  t.save_checkpoint(path, true);
  fs::resize_file(path + ".buffer", fs::file_size(path + ".buffer") - 8);
  EXPECT_THROW(Trainer::load_checkpoint(path), LoadError);
}

TEST(Train, WritesRunFiles) {
  TempDir dir;
  RunConfig c = tiny();
  c.checkpoint_every = 2;
  const RunResult r = train(c, dir.path());
  for (const char* f : {"metrics.csv", "timing.csv", "run_info.json", "checkpoint.json", "checkpoint.json.buffer"}) {
    EXPECT_TRUE(fs::exists(dir.path() / f)) << f;
  }
  EXPECT_EQ(slurp(dir.path() / "metrics.csv"), metrics_csv(r.metrics));
  EXPECT_EQ(r.metrics.size(), 6u);
}

TEST(Compare, RunsBothArmsPerSeed) {
  TempDir dir;
  RunConfig p = tiny();
  p.epochs = 2;
  RunConfig b = p;
  b.curriculum.baseline = true;
  const ComparisonReport rep = compare(p, b, {1, 2}, dir.path());
  EXPECT_EQ(rep.pccl_hash, rep.baseline_hash);
  ASSERT_EQ(rep.pccl.size(), 2u);
  ASSERT_EQ(rep.baseline.size(), 2u);
  EXPECT_EQ(rep.pccl[1].seed, 2u);
  for (const char* f : {"pccl.csv", "baseline.csv", "summary.csv"}) EXPECT_TRUE(fs::exists(dir.path() / f)) << f;
  EXPECT_TRUE(fs::exists(dir.path() / "baseline" / "seed_2" / "metrics.csv"));
  std::istringstream summary(slurp(dir.path() / "summary.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(summary, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

TEST(Compare, RejectsMismatchedArms) {
  RunConfig p = tiny();
  RunConfig b = p;
  b.curriculum.baseline = true;
  b.agent.tau = 0.5;
  EXPECT_THROW(compare(p, b, {1}), InvalidConfig);
  EXPECT_THROW(compare(p, p, {1}), InvalidConfig);
}
