#include "medgrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "medgrpo/errors.hpp"

namespace medgrpo {

ToyPolicy ToyPolicy::zeros(int num_actions, int num_features) {
  if (num_actions < 2) throw ValidationError("ToyPolicy: needs at least 2 actions");
  if (num_features < 1) throw ValidationError("ToyPolicy: needs at least 1 feature");
  ToyPolicy p;
  p.num_actions = num_actions;
  p.num_features = num_features;
  p.weights.assign(static_cast<std::size_t>(num_actions) * num_features, 0.0);
  return p;
}

std::vector<double> ToyPolicy::logits(const std::vector<double>& context) const {
  if (static_cast<int>(context.size()) != num_features) {
    throw ValidationError("ToyPolicy: context length does not match num_features");
  }
  std::vector<double> z(num_actions, 0.0);
  for (int a = 0; a < num_actions; ++a) {
    double acc = 0.0;
    for (int f = 0; f < num_features; ++f) acc += weight(a, f) * context[f];
    z[a] = acc;
  }
  return z;
}

namespace {

std::vector<double> softmax(std::vector<double> z) {
  double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (double& v : z) v /= total;
  return z;
}

}  // namespace

std::vector<double> ToyPolicy::probs(const std::vector<double>& context) const {
  return softmax(logits(context));
}

int tokens_per_candidate(int num_actions) {
  if (num_actions < 2) throw ValidationError("tokens_per_candidate: needs at least 2 actions");
  int bits = 1;
  while ((1 << bits) < num_actions) ++bits;
  return bits;
}

int candidate_token(int candidate, int token_index, int token_count) {
  return (candidate >> (token_count - 1 - token_index)) & 1;
}

namespace {

// Candidates sharing the first `depth` tokens of `candidate` form the
// contiguous index range [lo, hi).
void subtree_range(int candidate, int depth, int token_count, int num_actions, int* lo, int* hi) {
  int prefix = depth == 0 ? 0 : (candidate >> (token_count - depth));
  *lo = prefix << (token_count - depth);
  *hi = std::min((prefix + 1) << (token_count - depth), num_actions);
}

double range_sum(const std::vector<double>& probs, int lo, int hi) {
  double total = 0.0;
  for (int i = lo; i < hi; ++i) total += probs[i];
  return total;
}

}  // namespace

std::vector<double> token_log_probs(const std::vector<double>& probs, int candidate) {
  int k = static_cast<int>(probs.size());
  if (candidate < 0 || candidate >= k) {
    throw ValidationError("token_log_probs: candidate out of range");
  }
  int bits = tokens_per_candidate(k);
  std::vector<double> out(bits, 0.0);
  for (int t = 0; t < bits; ++t) {
    int blo, bhi, alo, ahi;
    subtree_range(candidate, t, bits, k, &blo, &bhi);
    subtree_range(candidate, t + 1, bits, k, &alo, &ahi);
    out[t] = std::log(range_sum(probs, alo, ahi)) - std::log(range_sum(probs, blo, bhi));
  }
  return out;
}

std::vector<double> token_log_prob_grad_logits(const std::vector<double>& probs, int candidate,
                                               int token_index) {
  int k = static_cast<int>(probs.size());
  int bits = tokens_per_candidate(k);
  if (token_index < 0 || token_index >= bits) {
    throw ValidationError("token_log_prob_grad_logits: token index out of range");
  }
  int blo, bhi, alo, ahi;
  subtree_range(candidate, token_index, bits, k, &blo, &bhi);
  subtree_range(candidate, token_index + 1, bits, k, &alo, &ahi);
  double pa = range_sum(probs, alo, ahi);
  double pb = range_sum(probs, blo, bhi);
  std::vector<double> grad(k, 0.0);
  for (int i = 0; i < k; ++i) {
    double in_a = (i >= alo && i < ahi) ? 1.0 / pa : 0.0;
    double in_b = (i >= blo && i < bhi) ? 1.0 / pb : 0.0;
    grad[i] = probs[i] * (in_a - in_b);
  }
  return grad;
}

int sample_action(const ToyPolicy& policy, const std::vector<double>& context,
                  double temperature, double top_p, Rng& rng) {
  if (temperature < 0.0) throw ValidationError("sample_action: temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) {
    throw ValidationError("sample_action: top_p must lie in (0, 1]");
  }
  std::vector<double> z = policy.logits(context);
  if (temperature <= 1e-12) {
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  for (double& v : z) v /= temperature;
  std::vector<double> p = softmax(std::move(z));

  std::vector<int> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });

  std::vector<double> nucleus(p.size(), 0.0);
  double cumulative = 0.0;
  double kept = 0.0;
  for (int idx : order) {
    nucleus[idx] = p[idx];
    cumulative += p[idx];
    kept += p[idx];
    if (cumulative >= top_p) break;
  }
  return rng.categorical(nucleus, kept);
}

double policy_entropy(const std::vector<double>& action_probs) {
  if (action_probs.empty()) throw ValidationError("policy_entropy: empty distribution");
  double total = 0.0;
  for (double p : action_probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ValidationError("policy_entropy: probabilities must be non-negative and finite");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("policy_entropy: probabilities must sum to 1 within 1e-9");
  }
  double h = 0.0;
  for (double p : action_probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace medgrpo
