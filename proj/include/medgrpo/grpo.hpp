#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "medgrpo/parallel.hpp"
#include "medgrpo/policy.hpp"
#include "medgrpo/task.hpp"

namespace medgrpo::grpo {

// Groups with population std below this are treated as all-equal and get
// zero advantages instead of amplified noise.
inline constexpr double kDegenerateStd = 1e-8;

// Log-ratio differences above this are clamped before exponentiation.
inline constexpr double kMaxLogRatio = 50.0;

struct ClipConfig {
  double eps_low = 0.2;
  double eps_high = 0.28;

  void validate() const;  // throws ValidationError
};

struct TrainConfig {
  int group_size = 8;
  double learning_rate = 5e-7;
  int gradient_steps = 2000;  // default run length
  ClipConfig clip;
  double temperature = 0.8;
  double top_p = 0.95;
  std::uint64_t seed = 0;
  int batch_prompts = 8;  // prompts drawn per step, stratified across datasets

  void validate() const;
};

// Group-relative advantages: (r_i - mean) / population std. Requires at
// least 2 finite rewards. All-equal groups (std < kDegenerateStd) yield all
// zeros.
std::vector<double> group_advantages(std::span<const double> rewards);

// exp(logp_new - logp_old) with the difference clamped at +kMaxLogRatio.
double importance_ratio(double logp_new, double logp_old);

struct TokenSurrogate {
  double term = 0.0;             // min(ratio * adv, clip(ratio) * adv)
  double gradient_weight = 0.0;  // adv when the unclipped branch is active, else 0
  bool clipped = false;
};

// Token-level clipped objective. The unclipped branch counts as active on
// ties, so on-policy tokens (ratio exactly 1) always pass gradient.
TokenSurrogate clipped_surrogate(double ratio, double advantage, const ClipConfig& clip);

// Loss contribution of one response: negated mean of its token terms.
double response_loss(std::span<const double> ratios, double advantage, const ClipConfig& clip);

struct ResponseRecord {
  int candidate = 0;
  std::vector<int> tokens;
  std::vector<double> logp_old;  // per token, under the policy that sampled
};

struct GroupRollout {
  std::string prompt_id;
  std::string dataset_id;
  TaskKind task = TaskKind::kSTG;
  int prompt_index = 0;  // caller-side context handle
  std::int64_t policy_version = 0;
  std::vector<ResponseRecord> responses;
  std::vector<double> raw_contents;  // latent content score per response
  std::vector<double> rewards;       // scores actually optimized
  std::vector<double> advantages;
};

struct TrainStepMetrics {
  std::map<std::string, double> mean_reward_by_dataset;
  double mean_advantage = 0.0;
  double entropy = 0.0;  // mean pre-update policy entropy over batch contexts
  double clipped_fraction = 0.0;
  double loss = 0.0;
};

// One gradient ascent step on the summed clipped surrogate over the batch.
// contexts[i] is the feature vector of batch[i]'s prompt. Rollouts must
// carry the current policy version (one step per rollout batch); a mismatch
// raises StalenessError. Serial and parallel execution produce bit-identical
// updates: per-group pieces fill preallocated slots and the reduction runs
// in fixed group order.
TrainStepMetrics train_step(ToyPolicy& policy, const std::vector<GroupRollout>& batch,
                            const std::vector<std::vector<double>>& contexts,
                            const TrainConfig& cfg, ExecMode exec = ExecMode::kParallel);

}  // namespace medgrpo::grpo
