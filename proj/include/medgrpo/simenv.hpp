#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "medgrpo/grpo.hpp"
#include "medgrpo/normalization.hpp"
#include "medgrpo/parallel.hpp"
#include "medgrpo/policy.hpp"
#include "medgrpo/task.hpp"

namespace medgrpo::sim {

// One synthetic dataset. Candidate quality is a Beta distribution whose
// median parameter is calibrated numerically to target_median; higher
// concentration means a tighter bulk. Observations are subject to sporadic
// scoring artifacts: with probability noise_scale a visit reports an
// uninformative extreme instead of the latent quality. Half the artifacts
// are whiffs (an overlap metric scores a complete miss as ~0), half are
// spurious perfects (empty-reference frames score ~1 by convention). The
// extremes dominate a group's std at either reward scale, so on a
// low-median dataset the raw score gaps between clean responses are crushed
// by group standardization, while the normalization layer's steep slope
// around the bulk stretches those gaps back out before the group sees them.
struct SyntheticDatasetSpec {
  std::string dataset_id;
  TaskKind task = TaskKind::kSTG;
  double target_median = 0.5;
  double concentration = 4.0;  // Beta a+b; higher = tighter bulk
  double noise_scale = 0.0;
  int num_prompts = 24;
  int num_candidates = 16;

  void validate() const;  // throws ValidationError
};

// A prompt with K fixed candidate answers. Latent scores are frozen at
// build time and have a unique maximum.
struct SyntheticPrompt {
  std::string prompt_id;
  int dataset_index = 0;
  std::vector<double> latent_scores;
  int best_candidate = 0;
};

struct SyntheticEnv {
  std::vector<SyntheticDatasetSpec> specs;
  std::vector<SyntheticPrompt> prompts;       // datasets concatenated in spec order
  std::vector<std::vector<int>> prompts_of;   // prompt indices per dataset
  int num_candidates = 0;
  std::uint64_t seed = 0;

  // Contexts are one-hot per prompt: policies are effectively per-prompt, so
  // datasets interact only through the reward signal, never through shared
  // weights.
  int num_features() const { return static_cast<int>(prompts.size()); }
  std::vector<double> context(int prompt_index) const;
};

// Deterministic for a given (specs, seed); the parallel path fills per-prompt
// slots from derived RNG streams and matches the serial path bit for bit.
SyntheticEnv build_environment(const std::vector<SyntheticDatasetSpec>& specs,
                               std::uint64_t seed, ExecMode exec = ExecMode::kParallel);

enum class ScoreMode { kRaw, kNormalized };

std::string to_string(ScoreMode mode);
ScoreMode parse_score_mode(const std::string& text);

// G responses sampled with the policy's temperature/top-p distribution;
// records per-token log-probs under the sampling-time policy.
grpo::GroupRollout rollout_group(const SyntheticEnv& env, const ToyPolicy& policy,
                                 int prompt_index, const grpo::TrainConfig& cfg, Rng& rng);

// Observes each response's content score (latent degraded by per-visit
// noise) and fills raw_contents, rewards, and advantages. Raw mode feeds the
// observed score straight to the optimizer; normalized mode routes it
// through the grounding composition (the format factor is always 1 here
// since synthetic answers are well-formed). Noise draws depend only on
// (env seed, policy version, prompt, slot), never on the mode: paired runs
// observe identical scores. Scoring the same rollout twice is idempotent.
void score_rollout(const SyntheticEnv& env, grpo::GroupRollout& rollout, ScoreMode mode,
                   const norm::StatsTable* stats);

// The observation model behind score_rollout, exposed for tests.
double observe_score(const SyntheticDatasetSpec& spec, double latent, Rng& rng);

// Percentile stats fitted on content scores sampled from the given policy,
// one table entry per dataset. This is the offline fitting step of the
// pipeline, run against the untrained policy.
norm::StatsTable fit_baseline_stats(const SyntheticEnv& env, const ToyPolicy& policy,
                                    const grpo::TrainConfig& cfg, int samples_per_prompt = 32);

struct StepRow {
  int step = 0;
  std::string dataset_id;
  double greedy_content = 0.0;   // mean latent of the policy's argmax choice
  double mean_raw_reward = 0.0;  // expected latent score under the policy
  double mean_norm_reward = 0.0; // expected optimized reward under the policy
  double entropy = 0.0;          // mean policy entropy over the dataset's prompts
  double clipped_fraction = 0.0; // from that step's update; 0 on the step-0 row
};

struct DatasetSummary {
  std::string dataset_id;
  double initial_greedy = 0.0;
  double final_greedy = 0.0;
  double improvement = 0.0;
  double final_entropy = 0.0;
  double positive_advantage_share = 0.0;  // over all responses in the run
};

struct RunReport {
  ScoreMode mode = ScoreMode::kNormalized;
  std::uint64_t seed = 0;
  int steps = 0;
  std::vector<StepRow> rows;  // (steps + 1) * num_datasets rows, step 0 first
  std::vector<DatasetSummary> datasets;
  // Overall per-step entropy trace (mean across all prompts) statistics.
  double entropy_mean = 0.0;
  double entropy_variance = 0.0;
  double entropy_min = 0.0;
  double entropy_max = 0.0;
  double mean_clipped_fraction = 0.0;
};

struct RunOptions {
  ScoreMode mode = ScoreMode::kNormalized;
  int steps = 2000;
  const norm::StatsTable* stats = nullptr;  // required in normalized mode
  ExecMode exec = ExecMode::kParallel;
  // Test hook, observed after scoring but before the policy update.
  std::function<void(int step, const std::vector<grpo::GroupRollout>&)> on_batch;
};

// Full loop: stratified batch selection, rollout, scoring, group
// advantages, one train_step per step. Identical seeds give bit-identical
// reports; raw and normalized runs from the same seed share identical
// first-step rollouts because reward mode touches nothing before scoring.
RunReport run_experiment(const SyntheticEnv& env, const grpo::TrainConfig& cfg,
                         const RunOptions& options);

// Report serialization; config_hash and seed ride along in a leading comment
// (CSV) or as fields (JSON).
void write_report_csv(const RunReport& report, const std::string& path,
                      const std::string& config_hash);
void write_report_summary_json(const RunReport& report, const std::string& path,
                               const std::string& config_hash);

}  // namespace medgrpo::sim
