#include "medgrpo/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "medgrpo/errors.hpp"

namespace medgrpo::grpo {

void ClipConfig::validate() const {
  if (!(eps_low > 0.0 && eps_low < 1.0)) {
    throw ValidationError("ClipConfig: eps_low must lie in (0, 1)");
  }
  if (!(eps_high > 0.0)) throw ValidationError("ClipConfig: eps_high must be positive");
}

void TrainConfig::validate() const {
  if (group_size < 2) throw ValidationError("TrainConfig: group_size must be at least 2");
  if (!(learning_rate > 0.0)) throw ValidationError("TrainConfig: learning_rate must be positive");
  if (gradient_steps < 0) throw ValidationError("TrainConfig: gradient_steps must be >= 0");
  if (!(temperature >= 0.0)) throw ValidationError("TrainConfig: temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ValidationError("TrainConfig: top_p must lie in (0, 1]");
  if (batch_prompts < 1) throw ValidationError("TrainConfig: batch_prompts must be at least 1");
  clip.validate();
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw ValidationError("group_advantages: needs a group of at least 2 rewards");
  }
  double mean = 0.0;
  for (double r : rewards) {
    if (!std::isfinite(r)) throw ValidationError("group_advantages: rewards must be finite");
    mean += r;
  }
  mean /= static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  double std_dev = std::sqrt(var / static_cast<double>(rewards.size()));

  std::vector<double> advantages(rewards.size(), 0.0);
  if (std_dev < kDegenerateStd) return advantages;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    advantages[i] = (rewards[i] - mean) / std_dev;
  }
  return advantages;
}

double importance_ratio(double logp_new, double logp_old) {
  if (!std::isfinite(logp_new) || !std::isfinite(logp_old)) {
    throw ValidationError("importance_ratio: log-probabilities must be finite");
  }
  return std::exp(std::min(logp_new - logp_old, kMaxLogRatio));
}

TokenSurrogate clipped_surrogate(double ratio, double advantage, const ClipConfig& clip) {
  clip.validate();
  if (!(ratio >= 0.0) || !std::isfinite(ratio)) {
    throw ValidationError("clipped_surrogate: ratio must be finite and non-negative");
  }
  if (!std::isfinite(advantage)) {
    throw ValidationError("clipped_surrogate: advantage must be finite");
  }
  double clamped = std::clamp(ratio, 1.0 - clip.eps_low, 1.0 + clip.eps_high);
  double unclipped_term = ratio * advantage;
  double clipped_term = clamped * advantage;
  TokenSurrogate out;
  out.term = std::min(unclipped_term, clipped_term);
  out.clipped = clipped_term < unclipped_term;
  out.gradient_weight = out.clipped ? 0.0 : advantage;
  return out;
}

double response_loss(std::span<const double> ratios, double advantage, const ClipConfig& clip) {
  if (ratios.empty()) throw ValidationError("response_loss: response has no tokens");
  double sum = 0.0;
  for (double rho : ratios) sum += clipped_surrogate(rho, advantage, clip).term;
  return -sum / static_cast<double>(ratios.size());
}

namespace {

void validate_batch(const ToyPolicy& policy, const std::vector<GroupRollout>& batch,
                    const std::vector<std::vector<double>>& contexts, const TrainConfig& cfg) {
  if (batch.empty()) throw ValidationError("train_step: batch is empty");
  if (contexts.size() != batch.size()) {
    throw ValidationError("train_step: contexts must pair one-to-one with batch rollouts");
  }
  for (const GroupRollout& g : batch) {
    if (g.policy_version != policy.version) {
      throw StalenessError("train_step: rollout policy version " +
                           std::to_string(g.policy_version) + " does not match policy version " +
                           std::to_string(policy.version));
    }
    if (g.responses.size() < 2) {
      throw ValidationError("train_step: every group needs at least 2 responses");
    }
    if (g.advantages.size() != g.responses.size() ||
        g.rewards.size() != g.responses.size()) {
      throw ValidationError("train_step: rewards/advantages not aligned with responses");
    }
    for (const ResponseRecord& r : g.responses) {
      if (r.candidate < 0 || r.candidate >= policy.num_actions) {
        throw ValidationError("train_step: response candidate out of range");
      }
      if (r.logp_old.size() != r.tokens.size() || r.tokens.empty()) {
        throw ValidationError("train_step: token records malformed");
      }
    }
  }
  cfg.validate();
}

struct GroupPiece {
  std::vector<double> grad_logits;  // dJ/dz for this group's context
  double loss = 0.0;
  double entropy = 0.0;
  double advantage_sum = 0.0;
  int response_count = 0;
  long clipped_tokens = 0;
  long token_count = 0;
  double reward_sum = 0.0;
};

}  // namespace

TrainStepMetrics train_step(ToyPolicy& policy, const std::vector<GroupRollout>& batch,
                            const std::vector<std::vector<double>>& contexts,
                            const TrainConfig& cfg, ExecMode exec) {
  validate_batch(policy, batch, contexts, cfg);

  std::vector<GroupPiece> pieces(batch.size());
  parallel_for(batch.size(), exec, [&](std::size_t gi) {
    const GroupRollout& group = batch[gi];
    GroupPiece& piece = pieces[gi];
    std::vector<double> probs = policy.probs(contexts[gi]);
    piece.entropy = policy_entropy(probs);
    piece.grad_logits.assign(static_cast<std::size_t>(policy.num_actions), 0.0);

    double g_count = static_cast<double>(group.responses.size());
    for (std::size_t ri = 0; ri < group.responses.size(); ++ri) {
      const ResponseRecord& resp = group.responses[ri];
      double advantage = group.advantages[ri];
      piece.advantage_sum += advantage;
      piece.reward_sum += group.rewards[ri];
      ++piece.response_count;

      std::vector<double> logp_new = token_log_probs(probs, resp.candidate);
      double t_count = static_cast<double>(resp.tokens.size());
      double term_sum = 0.0;
      for (std::size_t t = 0; t < resp.tokens.size(); ++t) {
        double rho = importance_ratio(logp_new[t], resp.logp_old[t]);
        TokenSurrogate s = clipped_surrogate(rho, advantage, cfg.clip);
        term_sum += s.term;
        ++piece.token_count;
        if (s.clipped) {
          ++piece.clipped_tokens;
          continue;
        }
        // dJ/dlogp_new = weight * rho for the active branch.
        double coeff = s.gradient_weight * rho / (g_count * t_count);
        std::vector<double> dlogp =
            token_log_prob_grad_logits(probs, resp.candidate, static_cast<int>(t));
        for (int a = 0; a < policy.num_actions; ++a) {
          piece.grad_logits[a] += coeff * dlogp[a];
        }
      }
      piece.loss += -term_sum / t_count / g_count;
    }
  });

  // Fixed-order reduction keeps the update identical across execution modes.
  TrainStepMetrics metrics;
  std::map<std::string, std::pair<double, int>> reward_acc;
  double advantage_sum = 0.0;
  int response_total = 0;
  long clipped_tokens = 0;
  long token_total = 0;
  double entropy_sum = 0.0;
  for (std::size_t gi = 0; gi < batch.size(); ++gi) {
    const GroupPiece& piece = pieces[gi];
    metrics.loss += piece.loss;
    entropy_sum += piece.entropy;
    advantage_sum += piece.advantage_sum;
    response_total += piece.response_count;
    clipped_tokens += piece.clipped_tokens;
    token_total += piece.token_count;
    auto& acc = reward_acc[batch[gi].dataset_id];
    acc.first += piece.reward_sum;
    acc.second += piece.response_count;
    const std::vector<double>& x = contexts[gi];
    for (int a = 0; a < policy.num_actions; ++a) {
      double g = piece.grad_logits[a];
      if (g == 0.0) continue;
      double step = cfg.learning_rate * g;
      for (int f = 0; f < policy.num_features; ++f) {
        if (x[f] != 0.0) policy.weight(a, f) += step * x[f];
      }
    }
  }
  policy.version += 1;

  for (const auto& [dataset, acc] : reward_acc) {
    metrics.mean_reward_by_dataset[dataset] = acc.first / static_cast<double>(acc.second);
  }
  metrics.mean_advantage = advantage_sum / static_cast<double>(response_total);
  metrics.entropy = entropy_sum / static_cast<double>(batch.size());
  metrics.clipped_fraction =
      token_total > 0 ? static_cast<double>(clipped_tokens) / static_cast<double>(token_total)
                      : 0.0;
  return metrics;
}

}  // namespace medgrpo::grpo
