#pragma once

#include <cstdint>
#include <vector>

#include "medgrpo/rng.hpp"

namespace medgrpo {

// Linear softmax policy over K fixed candidate answers. Candidate c is
// emitted as its binary code (most significant bit first, ceil(log2(K))
// tokens), and per-token probabilities are the conditional probabilities of
// the candidate subtree consistent with the prefix, so token log-probs sum
// exactly to log softmax(c). That gives the token-level objective real
// per-position ratios without a second model.
struct ToyPolicy {
  int num_actions = 0;   // K
  int num_features = 0;  // F
  std::vector<double> weights;  // K x F, row-major
  std::int64_t version = 0;

  static ToyPolicy zeros(int num_actions, int num_features);

  double& weight(int action, int feature) { return weights[action * num_features + feature]; }
  double weight(int action, int feature) const {
    return weights[action * num_features + feature];
  }

  std::vector<double> logits(const std::vector<double>& context) const;
  // Temperature-1 softmax; the distribution the recorded log-probs refer to.
  std::vector<double> probs(const std::vector<double>& context) const;
};

int tokens_per_candidate(int num_actions);  // ceil(log2 K), at least 1

// Token t of candidate c (0 or 1), most significant bit first.
int candidate_token(int candidate, int token_index, int token_count);

// Per-token log-probabilities of candidate c under probs. Length equals
// tokens_per_candidate; the values sum to log(probs[c]).
std::vector<double> token_log_probs(const std::vector<double>& probs, int candidate);

// d log p(token t | prefix) / d logit_k for every k. probs must be the
// temperature-1 softmax the policy assigns to this context.
std::vector<double> token_log_prob_grad_logits(const std::vector<double>& probs, int candidate,
                                               int token_index);

// Softmax with temperature then top-p nucleus filtering. temperature <= 1e-12
// degenerates to argmax (first index on ties). Candidates are ordered by
// descending probability (index ascending on ties) and the smallest prefix
// reaching top_p is kept and renormalized.
int sample_action(const ToyPolicy& policy, const std::vector<double>& context,
                  double temperature, double top_p, Rng& rng);

// Entropy of a full action distribution, -sum p ln p with 0 ln 0 = 0.
// Probabilities must be non-negative and sum to 1 within 1e-9.
double policy_entropy(const std::vector<double>& action_probs);

}  // namespace medgrpo
