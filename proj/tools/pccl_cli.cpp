// Command-line front end: train, eval, compare, schedule.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pccl/config.hpp"
#include "pccl/trainer.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs/latest";
  std::string profile = "paper";
  bool baseline = false;
  std::optional<std::string> reward;
  std::string resume;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON run-config file, overlaid on the profile");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--profile", o.profile, "Hyperparameter profile")
      ->check(CLI::IsMember({"paper", "desk"}))
      ->capture_default_str();
  cmd->add_flag("--baseline", o.baseline, "Train at a fixed precision instead of the decay schedule");
  cmd->add_option("--reward", o.reward, "Reward mode")->check(CLI::IsMember({"dense", "sparse"}));
  cmd->add_option("--resume", o.resume, "Checkpoint to resume from (train) or to evaluate (eval)");
}

pccl::RunConfig build_config(const CommonOptions& o) {
  const pccl::RewardMode reward = o.reward ? pccl::reward_mode_from_string(*o.reward) : pccl::RewardMode::Dense;
  pccl::RunConfig cfg = pccl::make_profile(pccl::profile_from_string(o.profile), reward);
  if (!o.config_path.empty()) cfg = pccl::load_run_config(o.config_path, cfg);
  if (o.reward) cfg.reward = reward;
  if (o.seed) cfg.seed = *o.seed;
  if (o.baseline) cfg.curriculum.baseline = true;
  cfg.validate();
  return cfg;
}

void log_epoch(const std::string& prefix, const pccl::EpochSummary& s) {
  if (!s.record) return;
  std::cerr << prefix << "epoch " << s.record->epoch << "  eps " << s.record->epsilon << "  steps "
            << s.record->acc_steps << "  mean_reward " << s.record->mean_reward;
  if (s.record->eval_success) std::cerr << "  eval_success " << *s.record->eval_success;
  std::cerr << '\n';
}

int run_train(const CommonOptions& o) {
  if (!o.resume.empty()) {
    pccl::Trainer t = pccl::Trainer::load_checkpoint(o.resume);
    std::cerr << "resuming at epoch " << t.next_epoch() << " of " << t.config().epochs
              << (t.resumed_without_buffer() ? " (replay buffer not restored)" : "") << '\n';
    const auto r = pccl::train(t, o.out_dir, [](const pccl::EpochSummary& s) { log_epoch("", s); });
    std::cout << "final checkpoint: " << r.checkpoint_path << '\n';
    return 0;
  }
  const pccl::RunConfig cfg = build_config(o);
  const auto r = pccl::train(cfg, o.out_dir, [](const pccl::EpochSummary& s) { log_epoch("", s); });
  std::cout << "total steps: " << r.total_steps << "\nfinal checkpoint: " << r.checkpoint_path << '\n';
  return 0;
}

int run_eval(const CommonOptions& o, std::optional<double> epsilon, std::optional<int> goals,
             const std::string& trace) {
  if (o.resume.empty()) throw pccl::InvalidConfig("eval needs --resume <checkpoint>");
  const pccl::Trainer t = pccl::Trainer::load_checkpoint(o.resume);
  const pccl::RunConfig& cfg = t.config();
  const double eps = epsilon.value_or(cfg.final_eval_epsilon);
  const int n = goals.value_or(cfg.final_eval_goals);
  std::mt19937_64 rng = pccl::make_stream(o.seed.value_or(cfg.seed), pccl::kFinalEvalStream);
  const double rate = pccl::evaluate(t.snapshot(), t.env(), n, eps, cfg.steps_per_episode, rng);
  std::cout << "success_rate," << rate << "\nepsilon," << eps << "\ngoals," << n << '\n';
  if (!trace.empty()) {
    pccl::write_text_file(trace, pccl::episode_trace_csv(t.snapshot(), t.env(), eps, cfg.steps_per_episode, rng));
  }
  return 0;
}

int run_compare(const CommonOptions& o, const std::vector<std::uint64_t>& seeds) {
  pccl::RunConfig pccl_cfg = build_config(o);
  pccl_cfg.curriculum.baseline = false;
  pccl::RunConfig base_cfg = pccl_cfg;
  base_cfg.curriculum.baseline = true;
  const auto rep = pccl::compare(pccl_cfg, base_cfg, seeds, std::filesystem::path(o.out_dir),
                                 [](const std::string& arm, std::uint64_t seed, const pccl::EpochSummary& s) {
                                   log_epoch("[" + arm + " seed " + std::to_string(seed) + "] ", s);
                                 });
  std::cout << pccl::summary_csv(rep);
  return 0;
}

int run_schedule(const CommonOptions& o, std::optional<std::int64_t> epochs) {
  pccl::RunConfig cfg = build_config(o);
  const std::int64_t last = epochs.value_or(cfg.curriculum.baseline ? cfg.epochs - 1 : cfg.curriculum.decay_epochs);
  std::ostringstream out;
  out << "k,epsilon\n";
  for (std::int64_t k = 0; k <= last; ++k) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", cfg.epsilon_at(k));
    out << k << ',' << buf << '\n';
  }
  std::cout << out.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Precision-curriculum DDPG for multi-goal arm reaching"};
  app.require_subcommand(1);

  CommonOptions train_opts, eval_opts, compare_opts, schedule_opts;
  auto* train = app.add_subcommand("train", "Train an agent and write metrics and a checkpoint");
  add_common(train, train_opts);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint's noise-free policy");
  add_common(eval, eval_opts);
  std::optional<double> eval_eps;
  std::optional<int> eval_goals;
  std::string trace;
  eval->add_option("--epsilon", eval_eps, "Precision (default: config final_epsilon)");
  eval->add_option("--goals", eval_goals, "Number of goals (default: config final_goals)");
  eval->add_option("--trace", trace, "Write one episode trace CSV to this path");

  auto* cmp = app.add_subcommand("compare", "Train curriculum and fixed-precision arms over several seeds");
  add_common(cmp, compare_opts);
  std::vector<std::uint64_t> seeds{1, 2, 3};
  cmp->add_option("--seeds", seeds, "Seeds")->delimiter(',')->capture_default_str();

  auto* sched = app.add_subcommand("schedule", "Print the precision schedule as CSV (k,epsilon)");
  add_common(sched, schedule_opts);
  std::optional<std::int64_t> sched_epochs;
  sched->add_option("--last-epoch", sched_epochs, "Last epoch to print (default: decay length)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(train_opts);
    if (*eval) return run_eval(eval_opts, eval_eps, eval_goals, trace);
    if (*cmp) return run_compare(compare_opts, seeds);
    if (*sched) return run_schedule(schedule_opts, sched_epochs);
  } catch (const pccl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
