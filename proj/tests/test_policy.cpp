#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "medgrpo/errors.hpp"
#include "medgrpo/policy.hpp"
#include "medgrpo/rng.hpp"

using namespace medgrpo;

namespace {

ToyPolicy random_policy(int num_actions, int num_features, Rng& rng) {
  ToyPolicy p = ToyPolicy::zeros(num_actions, num_features);
  for (double& w : p.weights) w = rng.normal();
  return p;
}

std::vector<double> random_context(int num_features, Rng& rng) {
  std::vector<double> c(num_features);
  for (double& v : c) v = rng.uniform(-1.0, 1.0);
  return c;
}

// Softmax written out longhand so the test does not lean on the library's.
std::vector<double> softmax_oracle(const std::vector<double>& z) {
  double zmax = z[0];
  for (double v : z) zmax = std::max(zmax, v);
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - zmax);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

// Policy whose temperature-1 action distribution is exactly `target`
// (one feature pinned at 1.0, logits are log target).
ToyPolicy policy_with_probs(const std::vector<double>& target) {
  ToyPolicy p = ToyPolicy::zeros(static_cast<int>(target.size()), 1);
  for (std::size_t a = 0; a < target.size(); ++a) p.weight(static_cast<int>(a), 0) = std::log(target[a]);
  return p;
}

}  // namespace

TEST_CASE("zeros validates shape and starts uniform") {
  CHECK_THROWS_AS(ToyPolicy::zeros(1, 3), ValidationError);
  CHECK_THROWS_AS(ToyPolicy::zeros(4, 0), ValidationError);

  ToyPolicy p = ToyPolicy::zeros(5, 3);
  CHECK(p.weights.size() == 15);
  std::vector<double> probs = p.probs({0.3, -0.2, 0.9});
  for (double v : probs) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("logits are the linear scores of the context") {
  ToyPolicy p = ToyPolicy::zeros(2, 2);
  p.weight(0, 0) = 1.0;
  p.weight(0, 1) = -2.0;
  p.weight(1, 0) = 0.5;
  p.weight(1, 1) = 3.0;
  std::vector<double> z = p.logits({2.0, 1.0});
  CHECK(z[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK_THROWS_AS(p.logits({1.0}), ValidationError);
}

TEST_CASE("probs match a longhand softmax") {
  Rng rng(100);
  for (int rep = 0; rep < 50; ++rep) {
    ToyPolicy p = random_policy(6, 4, rng);
    std::vector<double> ctx = random_context(4, rng);
    std::vector<double> probs = p.probs(ctx);
    std::vector<double> expect = softmax_oracle(p.logits(ctx));
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      CHECK(probs[i] == doctest::Approx(expect[i]).epsilon(1e-12));
      sum += probs[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("candidates map to fixed-width binary token codes") {
  CHECK(tokens_per_candidate(2) == 1);
  CHECK(tokens_per_candidate(3) == 2);
  CHECK(tokens_per_candidate(4) == 2);
  CHECK(tokens_per_candidate(5) == 3);
  CHECK(tokens_per_candidate(8) == 3);
  CHECK(tokens_per_candidate(16) == 4);
  CHECK_THROWS_AS(tokens_per_candidate(1), ValidationError);

  // Candidate 5 in three tokens is 101, most significant bit first.
  CHECK(candidate_token(5, 0, 3) == 1);
  CHECK(candidate_token(5, 1, 3) == 0);
  CHECK(candidate_token(5, 2, 3) == 1);
  CHECK(candidate_token(0, 0, 1) == 0);
  CHECK(candidate_token(1, 0, 1) == 1);
}

TEST_CASE("token log-probs telescope to the candidate log-prob") {
  Rng rng(200);
  for (int k : {2, 3, 5, 8, 16}) {
    for (int rep = 0; rep < 20; ++rep) {
      ToyPolicy p = random_policy(k, 3, rng);
      std::vector<double> ctx = random_context(3, rng);
      std::vector<double> probs = p.probs(ctx);
      for (int c = 0; c < k; ++c) {
        std::vector<double> tlp = token_log_probs(probs, c);
        CHECK(static_cast<int>(tlp.size()) == tokens_per_candidate(k));
        double sum = 0.0;
        for (double v : tlp) {
          CHECK(v <= 1e-15);  // conditionals never exceed one
          CHECK(std::isfinite(v));
          sum += v;
        }
        CHECK(sum == doctest::Approx(std::log(probs[c])).epsilon(1e-10));
      }
    }
  }
  CHECK_THROWS_AS(token_log_probs({0.5, 0.5}, 2), ValidationError);
  CHECK_THROWS_AS(token_log_probs({0.5, 0.5}, -1), ValidationError);
}

TEST_CASE("token log-prob gradients match finite differences") {
  Rng rng(300);
  const double h = 1e-6;
  for (int k : {2, 5, 8}) {
    ToyPolicy p = random_policy(k, 3, rng);
    std::vector<double> ctx = random_context(3, rng);
    std::vector<double> z = p.logits(ctx);
    std::vector<double> probs = softmax_oracle(z);
    int bits = tokens_per_candidate(k);
    for (int c = 0; c < k; ++c) {
      for (int t = 0; t < bits; ++t) {
        std::vector<double> grad = token_log_prob_grad_logits(probs, c, t);
        for (int i = 0; i < k; ++i) {
          std::vector<double> zp = z;
          std::vector<double> zm = z;
          zp[i] += h;
          zm[i] -= h;
          double fp = token_log_probs(softmax_oracle(zp), c)[t];
          double fm = token_log_probs(softmax_oracle(zm), c)[t];
          double fd = (fp - fm) / (2.0 * h);
          CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
        }
      }
    }
  }
  CHECK_THROWS_AS(token_log_prob_grad_logits({0.5, 0.5}, 0, 1), ValidationError);
}

TEST_CASE("near-zero temperature degenerates to argmax") {
  ToyPolicy p = ToyPolicy::zeros(4, 1);
  p.weight(0, 0) = 0.1;
  p.weight(1, 0) = 2.0;
  p.weight(2, 0) = -1.0;
  p.weight(3, 0) = 2.0;  // ties with action 1; the first max wins
  Rng rng(400);
  for (int i = 0; i < 50; ++i) {
    CHECK(sample_action(p, {1.0}, 0.0, 1.0, rng) == 1);
    CHECK(sample_action(p, {1.0}, 1e-13, 0.4, rng) == 1);
  }
}

TEST_CASE("sampling frequencies converge to the softmax distribution") {
  Rng rng(500);
  ToyPolicy p = policy_with_probs({0.45, 0.3, 0.15, 0.1});
  const int n = 10000;

  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) counts[sample_action(p, {1.0}, 1.0, 1.0, rng)]++;
  std::vector<double> expect = {0.45, 0.3, 0.15, 0.1};
  for (int a = 0; a < 4; ++a) {
    CHECK(static_cast<double>(counts[a]) / n == doctest::Approx(expect[a]).epsilon(0.08));
    CHECK(std::abs(static_cast<double>(counts[a]) / n - expect[a]) < 0.02);
  }

  // Temperature reshapes the distribution to softmax(logits / T).
  std::vector<double> sharpened = softmax_oracle(
      {std::log(0.45) / 0.5, std::log(0.3) / 0.5, std::log(0.15) / 0.5, std::log(0.1) / 0.5});
  std::fill(counts.begin(), counts.end(), 0);
  for (int i = 0; i < n; ++i) counts[sample_action(p, {1.0}, 0.5, 1.0, rng)]++;
  for (int a = 0; a < 4; ++a) {
    CHECK(std::abs(static_cast<double>(counts[a]) / n - sharpened[a]) < 0.02);
  }
}

TEST_CASE("top-p keeps the smallest prefix reaching the mass") {
  ToyPolicy p = policy_with_probs({0.5, 0.3, 0.2});
  Rng rng(600);

  // 0.5 already reaches top_p = 0.5: nucleus is the single best action.
  for (int i = 0; i < 200; ++i) CHECK(sample_action(p, {1.0}, 1.0, 0.5, rng) == 0);

  // top_p = 0.6 needs two actions; the third must never appear and the two
  // kept ones renormalize to 0.625 / 0.375.
  std::vector<int> counts(3, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[sample_action(p, {1.0}, 1.0, 0.6, rng)]++;
  CHECK(counts[2] == 0);
  CHECK(std::abs(static_cast<double>(counts[0]) / n - 0.625) < 0.02);
  CHECK(std::abs(static_cast<double>(counts[1]) / n - 0.375) < 0.02);
}

TEST_CASE("sampling validates temperature and top-p") {
  ToyPolicy p = ToyPolicy::zeros(3, 1);
  Rng rng(700);
  CHECK_THROWS_AS(sample_action(p, {1.0}, -0.5, 1.0, rng), ValidationError);
  CHECK_THROWS_AS(sample_action(p, {1.0}, 1.0, 0.0, rng), ValidationError);
  CHECK_THROWS_AS(sample_action(p, {1.0}, 1.0, 1.5, rng), ValidationError);
}

TEST_CASE("entropy is nats over the action distribution") {
  CHECK(policy_entropy({0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(policy_entropy({0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(policy_entropy({1.0, 0.0, 0.0}) == 0.0);
  CHECK(policy_entropy({0.7, 0.3}) ==
        doctest::Approx(-0.7 * std::log(0.7) - 0.3 * std::log(0.3)).epsilon(1e-12));

  CHECK_THROWS_AS(policy_entropy({}), ValidationError);
  CHECK_THROWS_AS(policy_entropy({0.5, 0.6}), ValidationError);
  CHECK_THROWS_AS(policy_entropy({-0.1, 1.1}), ValidationError);

  // Uniform maximizes entropy among sampled distributions.
  Rng rng(800);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> p(5);
    double total = 0.0;
    for (double& v : p) {
      v = rng.uniform01() + 1e-12;
      total += v;
    }
    for (double& v : p) v /= total;
    CHECK(policy_entropy(p) <= std::log(5.0) + 1e-12);
  }
}
