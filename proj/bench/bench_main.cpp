#include <chrono>
#include <cstdio>

#include "medgrpo/parallel.hpp"
#include "medgrpo/simenv.hpp"

// Times the serial reference path against the OpenMP path on the same
// workload and checks the reports agree exactly. The parallel kernels fill
// preallocated slots and reduce in fixed order, so any numeric difference is
// a bug, not reordering noise.
namespace {

using namespace medgrpo;

double run_once(const sim::SyntheticEnv& env, const grpo::TrainConfig& cfg,
                const norm::StatsTable& stats, int steps, ExecMode exec, sim::RunReport* out) {
  sim::RunOptions options;
  options.mode = sim::ScoreMode::kNormalized;
  options.steps = steps;
  options.stats = &stats;
  options.exec = exec;
  const auto start = std::chrono::steady_clock::now();
  *out = sim::run_experiment(env, cfg, options);
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(stop - start).count();
}

bool reports_equal(const sim::RunReport& a, const sim::RunReport& b) {
  if (a.rows.size() != b.rows.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    if (a.rows[i].greedy_content != b.rows[i].greedy_content ||
        a.rows[i].mean_raw_reward != b.rows[i].mean_raw_reward ||
        a.rows[i].mean_norm_reward != b.rows[i].mean_norm_reward ||
        a.rows[i].entropy != b.rows[i].entropy ||
        a.rows[i].clipped_fraction != b.rows[i].clipped_fraction) {
      return false;
    }
  }
  return a.entropy_variance == b.entropy_variance &&
         a.mean_clipped_fraction == b.mean_clipped_fraction;
}

}  // namespace

int main() {
  std::vector<sim::SyntheticDatasetSpec> specs(2);
  specs[0].dataset_id = "wide";
  specs[0].target_median = 0.5;
  specs[0].concentration = 4.0;
  specs[0].num_prompts = 64;
  specs[1].dataset_id = "narrow";
  specs[1].target_median = 0.12;
  specs[1].concentration = 60.0;
  specs[1].noise_scale = 0.05;
  specs[1].num_prompts = 64;

  grpo::TrainConfig cfg;
  cfg.learning_rate = 0.3;
  cfg.batch_prompts = 16;
  cfg.seed = 11;

  const int steps = 200;
  const auto env = sim::build_environment(specs, cfg.seed, ExecMode::kSerial);
  const auto policy = ToyPolicy::zeros(env.num_candidates, env.num_features());
  const auto stats = sim::fit_baseline_stats(env, policy, cfg);

  std::printf("threads available: %d\n", max_threads());
  std::printf("workload: %zu prompts, %d candidates, %d steps, batch %d\n", env.prompts.size(),
              env.num_candidates, steps, cfg.batch_prompts);

  sim::RunReport serial_report;
  sim::RunReport parallel_report;
  // Warm both paths once so first-touch allocation noise stays out of the
  // timed runs.
  run_once(env, cfg, stats, 10, ExecMode::kSerial, &serial_report);
  run_once(env, cfg, stats, 10, ExecMode::kParallel, &parallel_report);

  const double serial_s = run_once(env, cfg, stats, steps, ExecMode::kSerial, &serial_report);
  const double parallel_s =
      run_once(env, cfg, stats, steps, ExecMode::kParallel, &parallel_report);

  std::printf("serial:   %8.3f s\n", serial_s);
  std::printf("parallel: %8.3f s (speedup %.2fx)\n", parallel_s, serial_s / parallel_s);
  if (!reports_equal(serial_report, parallel_report)) {
    std::printf("MISMATCH: serial and parallel reports differ\n");
    return 1;
  }
  std::printf("reports identical across execution modes\n");
  return 0;
}
