#include "medgrpo/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "medgrpo/errors.hpp"
#include "medgrpo/rewards.hpp"

namespace medgrpo::sim {

namespace {

constexpr std::uint64_t kCalibrationSalt = 0x63616c6962;
constexpr std::uint64_t kPromptSalt = 0x70726f6d7074;
constexpr std::uint64_t kFitSalt = 0x666974;
constexpr std::uint64_t kBatchSalt = 0x6261746368;
constexpr std::uint64_t kRolloutSalt = 0x726f6c6c;
constexpr std::uint64_t kObserveSalt = 0x6f6273;

constexpr int kProbeSamples = 4001;
constexpr int kMaxPromptRedraws = 100;

// Kerman's median approximation inverted: for Beta(a, b) with a + b = nu,
// median ~= (a - 1/3) / (nu - 2/3).
double beta_a_for_median(double median, double concentration) {
  double a = median * (concentration - 2.0 / 3.0) + 1.0 / 3.0;
  return std::clamp(a, 1e-2, concentration - 1e-2);
}

double draw_latent(double median_param, const SyntheticDatasetSpec& spec, Rng& rng) {
  const double a = beta_a_for_median(median_param, spec.concentration);
  return rng.beta(a, spec.concentration - a);
}

double probe_median(double median_param, const SyntheticDatasetSpec& spec,
                    std::uint64_t probe_seed) {
  std::vector<double> samples(kProbeSamples);
  Rng rng(probe_seed);
  for (double& s : samples) {
    s = draw_latent(median_param, spec, rng);
  }
  auto mid = samples.begin() + kProbeSamples / 2;
  std::nth_element(samples.begin(), mid, samples.end());
  return *mid;
}

// The Beta median is monotone in the median parameter, so bisection against
// a fixed probe stream corrects the approximation error of the a(median)
// mapping. The probe seed does not depend on the environment seed: the same
// spec always calibrates to the same shape.
double calibrate_median_param(const SyntheticDatasetSpec& spec, int dataset_index) {
  const std::uint64_t probe_seed = derive_seed(kCalibrationSalt, static_cast<std::uint64_t>(dataset_index));
  double lo = 1e-3;
  double hi = 1.0 - 1e-3;
  for (int iter = 0; iter < 48; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (probe_median(mid, spec, probe_seed) < spec.target_median) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void SyntheticDatasetSpec::validate() const {
  if (dataset_id.empty()) {
    throw ValidationError("dataset_id must be non-empty");
  }
  if (!std::isfinite(target_median) || target_median <= 0.0 || target_median >= 1.0) {
    throw ValidationError("target_median must lie strictly inside (0, 1)");
  }
  if (!std::isfinite(concentration) || concentration <= 1.0) {
    throw ValidationError("concentration must be finite and > 1");
  }
  if (!std::isfinite(noise_scale) || noise_scale < 0.0 || noise_scale > 1.0) {
    throw ValidationError("noise_scale must be a rate in [0, 1]");
  }
  if (num_prompts < 1) {
    throw ValidationError("num_prompts must be at least 1");
  }
  if (num_candidates < 2) {
    throw ValidationError("num_candidates must be at least 2");
  }
}

std::vector<double> SyntheticEnv::context(int prompt_index) const {
  if (prompt_index < 0 || prompt_index >= static_cast<int>(prompts.size())) {
    throw ValidationError("prompt_index out of range");
  }
  std::vector<double> x(prompts.size(), 0.0);
  x[static_cast<std::size_t>(prompt_index)] = 1.0;
  return x;
}

SyntheticEnv build_environment(const std::vector<SyntheticDatasetSpec>& specs,
                               std::uint64_t seed, ExecMode exec) {
  if (specs.empty()) {
    throw ValidationError("at least one dataset spec required");
  }
  for (const auto& spec : specs) {
    spec.validate();
    if (spec.num_candidates != specs.front().num_candidates) {
      throw ValidationError("all datasets must share num_candidates");
    }
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (std::size_t j = i + 1; j < specs.size(); ++j) {
      if (specs[i].dataset_id == specs[j].dataset_id) {
        throw ValidationError("duplicate dataset_id: " + specs[i].dataset_id);
      }
    }
  }

  SyntheticEnv env;
  env.specs = specs;
  env.num_candidates = specs.front().num_candidates;
  env.seed = seed;

  std::vector<double> median_params(specs.size());
  for (std::size_t d = 0; d < specs.size(); ++d) {
    median_params[d] = calibrate_median_param(specs[d], static_cast<int>(d));
  }

  int total = 0;
  env.prompts_of.resize(specs.size());
  for (std::size_t d = 0; d < specs.size(); ++d) {
    for (int p = 0; p < specs[d].num_prompts; ++p) {
      env.prompts_of[d].push_back(total + p);
    }
    total += specs[d].num_prompts;
  }
  env.prompts.resize(static_cast<std::size_t>(total));

  std::vector<std::string> failures(static_cast<std::size_t>(total));
  parallel_for(static_cast<std::size_t>(total), exec, [&](std::size_t slot) {
    std::size_t d = 0;
    while (slot >= static_cast<std::size_t>(env.prompts_of[d].back()) + 1) {
      ++d;
    }
    const auto& spec = specs[d];
    const int local = static_cast<int>(slot) - env.prompts_of[d].front();

    SyntheticPrompt prompt;
    prompt.prompt_id = spec.dataset_id + "/p" + std::to_string(local);
    prompt.dataset_index = static_cast<int>(d);
    prompt.latent_scores.resize(static_cast<std::size_t>(spec.num_candidates));

    Rng rng(derive_seed(seed, kPromptSalt, slot));
    bool unique_max = false;
    for (int attempt = 0; attempt < kMaxPromptRedraws && !unique_max; ++attempt) {
      for (double& s : prompt.latent_scores) {
        s = draw_latent(median_params[d], spec, rng);
      }
      auto best = std::max_element(prompt.latent_scores.begin(), prompt.latent_scores.end());
      prompt.best_candidate = static_cast<int>(best - prompt.latent_scores.begin());
      unique_max = std::count(prompt.latent_scores.begin(), prompt.latent_scores.end(), *best) == 1;
    }
    if (!unique_max) {
      failures[slot] = prompt.prompt_id;
      return;
    }
    env.prompts[slot] = std::move(prompt);
  });

  for (const auto& f : failures) {
    if (!f.empty()) {
      throw FittingError("could not draw a unique best candidate for " + f +
                         "; the latent distribution degenerates");
    }
  }
  return env;
}

std::string to_string(ScoreMode mode) {
  return mode == ScoreMode::kRaw ? "raw" : "normalized";
}

ScoreMode parse_score_mode(const std::string& text) {
  if (text == "raw") {
    return ScoreMode::kRaw;
  }
  if (text == "normalized") {
    return ScoreMode::kNormalized;
  }
  throw ConfigError("unknown score mode: " + text + " (expected raw or normalized)");
}

grpo::GroupRollout rollout_group(const SyntheticEnv& env, const ToyPolicy& policy,
                                 int prompt_index, const grpo::TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (policy.num_actions != env.num_candidates || policy.num_features != env.num_features()) {
    throw ValidationError("policy shape does not match environment");
  }
  const auto& prompt = env.prompts.at(static_cast<std::size_t>(prompt_index));
  const auto& spec = env.specs[static_cast<std::size_t>(prompt.dataset_index)];

  const auto context = env.context(prompt_index);
  const auto probs = policy.probs(context);
  const int token_count = tokens_per_candidate(env.num_candidates);

  grpo::GroupRollout rollout;
  rollout.prompt_id = prompt.prompt_id;
  rollout.dataset_id = spec.dataset_id;
  rollout.task = spec.task;
  rollout.prompt_index = prompt_index;
  rollout.policy_version = policy.version;
  rollout.responses.reserve(static_cast<std::size_t>(cfg.group_size));
  for (int i = 0; i < cfg.group_size; ++i) {
    grpo::ResponseRecord rec;
    rec.candidate = sample_action(policy, context, cfg.temperature, cfg.top_p, rng);
    rec.tokens.resize(static_cast<std::size_t>(token_count));
    for (int t = 0; t < token_count; ++t) {
      rec.tokens[static_cast<std::size_t>(t)] = candidate_token(rec.candidate, t, token_count);
    }
    rec.logp_old = token_log_probs(probs, rec.candidate);
    rollout.responses.push_back(std::move(rec));
  }
  return rollout;
}

double observe_score(const SyntheticDatasetSpec& spec, double latent, Rng& rng) {
  // noise_scale is the rate of scoring artifacts. With that probability the
  // metric misfires and reports an uninformative extreme instead of the
  // latent quality: half the artifacts are whiffs (a grounding metric scores
  // a complete miss as ~0), half are spurious perfects (empty-reference
  // frames score ~1 by convention). Otherwise the latent is reported
  // exactly. Two uniforms are always consumed so the stream layout does not
  // depend on outcomes.
  const double u = rng.uniform01();
  const double v = rng.uniform01();
  double x = latent;
  if (u < spec.noise_scale) {
    x = v < 0.5 ? 0.04 * v : 1.0 - 0.04 * (1.0 - v);
  }
  return std::clamp(x, 0.0, 1.0);
}

void score_rollout(const SyntheticEnv& env, grpo::GroupRollout& rollout, ScoreMode mode,
                   const norm::StatsTable* stats) {
  if (mode == ScoreMode::kNormalized && stats == nullptr) {
    throw ValidationError("normalized scoring requires a stats table");
  }
  const auto& prompt = env.prompts.at(static_cast<std::size_t>(rollout.prompt_index));
  const auto& spec = env.specs[static_cast<std::size_t>(prompt.dataset_index)];
  const norm::PercentileStats* entry = nullptr;
  if (mode == ScoreMode::kNormalized) {
    entry = &stats->at(rollout.dataset_id, rollout.task, RewardChannel::kContent);
  }

  // Observation noise is keyed by rollout identity, not by mode, so paired
  // raw/normalized runs score the same responses identically.
  Rng rng(derive_seed(env.seed, kObserveSalt, static_cast<std::uint64_t>(rollout.policy_version),
                      static_cast<std::uint64_t>(rollout.prompt_index)));
  const std::size_t n = rollout.responses.size();
  rollout.raw_contents.resize(n);
  rollout.rewards.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = rollout.responses[i].candidate;
    const double latent = prompt.latent_scores.at(static_cast<std::size_t>(c));
    const double observed = observe_score(spec, latent, rng);
    rollout.raw_contents[i] = observed;
    if (mode == ScoreMode::kRaw) {
      rollout.rewards[i] = observed;
    } else {
      // Synthetic answers are always well formed, so the format factor is 1.
      rollout.rewards[i] = rewards::compose_grounding(*entry, observed, true).final;
    }
  }
  rollout.advantages = grpo::group_advantages(rollout.rewards);
}

norm::StatsTable fit_baseline_stats(const SyntheticEnv& env, const ToyPolicy& policy,
                                    const grpo::TrainConfig& cfg, int samples_per_prompt) {
  if (samples_per_prompt < 1) {
    throw ValidationError("samples_per_prompt must be at least 1");
  }
  norm::StatsTable table;
  for (std::size_t d = 0; d < env.specs.size(); ++d) {
    std::vector<double> scores;
    scores.reserve(env.prompts_of[d].size() * static_cast<std::size_t>(samples_per_prompt));
    for (int p : env.prompts_of[d]) {
      Rng rng(derive_seed(env.seed, kFitSalt, static_cast<std::uint64_t>(p)));
      const auto context = env.context(p);
      const auto& latents = env.prompts[static_cast<std::size_t>(p)].latent_scores;
      for (int s = 0; s < samples_per_prompt; ++s) {
        const int c = sample_action(policy, context, cfg.temperature, cfg.top_p, rng);
        // Fitted on observed scores, like offline predictions scored by the
        // same noisy metric the training loop sees.
        scores.push_back(observe_score(env.specs[d], latents[static_cast<std::size_t>(c)], rng));
      }
    }
    table.insert(env.specs[d].dataset_id, env.specs[d].task, RewardChannel::kContent,
                 norm::fit_percentile_stats(scores));
  }
  return table;
}

namespace {

struct PromptEval {
  double entropy = 0.0;
  double greedy_latent = 0.0;
  double expected_raw = 0.0;
  double expected_opt = 0.0;
};

// Exact expectations under the current policy, no sampling. expected_opt is
// the reward the optimizer sees (equals expected_raw in raw mode).
PromptEval eval_prompt(const SyntheticEnv& env, const ToyPolicy& policy, int prompt_index,
                       ScoreMode mode, const norm::PercentileStats* entry) {
  const auto probs = policy.probs(env.context(prompt_index));
  const auto& latents = env.prompts[static_cast<std::size_t>(prompt_index)].latent_scores;

  PromptEval ev;
  ev.entropy = policy_entropy(probs);
  const auto best = std::max_element(probs.begin(), probs.end());
  ev.greedy_latent = latents[static_cast<std::size_t>(best - probs.begin())];
  for (std::size_t c = 0; c < probs.size(); ++c) {
    ev.expected_raw += probs[c] * latents[c];
    if (mode == ScoreMode::kNormalized) {
      ev.expected_opt += probs[c] * rewards::compose_grounding(*entry, latents[c], true).final;
    }
  }
  if (mode == ScoreMode::kRaw) {
    ev.expected_opt = ev.expected_raw;
  }
  return ev;
}

}  // namespace

RunReport run_experiment(const SyntheticEnv& env, const grpo::TrainConfig& cfg,
                         const RunOptions& options) {
  cfg.validate();
  if (options.steps < 0) {
    throw ValidationError("steps must be non-negative");
  }
  const std::size_t num_datasets = env.specs.size();
  std::vector<const norm::PercentileStats*> entries(num_datasets, nullptr);
  if (options.mode == ScoreMode::kNormalized) {
    if (options.stats == nullptr) {
      throw ValidationError("normalized mode requires a stats table");
    }
    for (std::size_t d = 0; d < num_datasets; ++d) {
      entries[d] = &options.stats->at(env.specs[d].dataset_id, env.specs[d].task,
                                      RewardChannel::kContent);
    }
  }

  ToyPolicy policy = ToyPolicy::zeros(env.num_candidates, env.num_features());
  const std::size_t num_prompts = env.prompts.size();

  RunReport report;
  report.mode = options.mode;
  report.seed = cfg.seed;
  report.steps = options.steps;

  std::vector<double> entropy_trace;
  entropy_trace.reserve(static_cast<std::size_t>(options.steps) + 1);
  std::vector<std::int64_t> positive_advantages(num_datasets, 0);
  std::vector<std::int64_t> total_responses(num_datasets, 0);
  double clipped_sum = 0.0;

  std::vector<PromptEval> evals(num_prompts);
  const auto evaluate = [&](int step, double clipped_fraction) {
    parallel_for(num_prompts, options.exec, [&](std::size_t p) {
      const int d = env.prompts[p].dataset_index;
      evals[p] = eval_prompt(env, policy, static_cast<int>(p), options.mode,
                             entries[static_cast<std::size_t>(d)]);
    });
    double entropy_all = 0.0;
    for (std::size_t d = 0; d < num_datasets; ++d) {
      StepRow row;
      row.step = step;
      row.dataset_id = env.specs[d].dataset_id;
      row.clipped_fraction = clipped_fraction;
      for (int p : env.prompts_of[d]) {
        const auto& ev = evals[static_cast<std::size_t>(p)];
        row.greedy_content += ev.greedy_latent;
        row.mean_raw_reward += ev.expected_raw;
        row.mean_norm_reward += ev.expected_opt;
        row.entropy += ev.entropy;
        entropy_all += ev.entropy;
      }
      const double count = static_cast<double>(env.prompts_of[d].size());
      row.greedy_content /= count;
      row.mean_raw_reward /= count;
      row.mean_norm_reward /= count;
      row.entropy /= count;
      report.rows.push_back(std::move(row));
    }
    entropy_trace.push_back(entropy_all / static_cast<double>(num_prompts));
  };

  evaluate(0, 0.0);

  for (int step = 1; step <= options.steps; ++step) {
    // Stratified draw: batch_prompts split as evenly as possible, the
    // remainder rotating across datasets so no dataset is systematically
    // shortchanged.
    std::vector<int> selected;
    const int base = cfg.batch_prompts / static_cast<int>(num_datasets);
    const int rem = cfg.batch_prompts % static_cast<int>(num_datasets);
    for (std::size_t d = 0; d < num_datasets; ++d) {
      int want = base;
      if (rem > 0 && static_cast<int>((d + static_cast<std::size_t>(step)) % num_datasets) < rem) {
        ++want;
      }
      auto pool = env.prompts_of[d];
      Rng rng(derive_seed(cfg.seed, kBatchSalt, static_cast<std::uint64_t>(step), d));
      const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(want), pool.size());
      for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform01() * static_cast<double>(pool.size() - i));
        std::swap(pool[i], pool[std::min(j, pool.size() - 1)]);
        selected.push_back(pool[i]);
      }
    }

    std::vector<grpo::GroupRollout> batch(selected.size());
    parallel_for(selected.size(), options.exec, [&](std::size_t slot) {
      Rng rng(derive_seed(cfg.seed, kRolloutSalt, static_cast<std::uint64_t>(step), slot));
      batch[slot] = rollout_group(env, policy, selected[slot], cfg, rng);
      score_rollout(env, batch[slot], options.mode, options.stats);
    });

    for (const auto& g : batch) {
      const auto d = static_cast<std::size_t>(env.prompts[static_cast<std::size_t>(g.prompt_index)].dataset_index);
      for (double a : g.advantages) {
        positive_advantages[d] += a > 0.0 ? 1 : 0;
        ++total_responses[d];
      }
    }
    if (options.on_batch) {
      options.on_batch(step, batch);
    }

    std::vector<std::vector<double>> contexts;
    contexts.reserve(batch.size());
    for (const auto& g : batch) {
      contexts.push_back(env.context(g.prompt_index));
    }
    const auto metrics = grpo::train_step(policy, batch, contexts, cfg, options.exec);
    clipped_sum += metrics.clipped_fraction;

    evaluate(step, metrics.clipped_fraction);
  }

  for (std::size_t d = 0; d < num_datasets; ++d) {
    DatasetSummary s;
    s.dataset_id = env.specs[d].dataset_id;
    s.initial_greedy = report.rows[d].greedy_content;
    const auto& last = report.rows[report.rows.size() - num_datasets + d];
    s.final_greedy = last.greedy_content;
    s.improvement = s.final_greedy - s.initial_greedy;
    s.final_entropy = last.entropy;
    s.positive_advantage_share =
        total_responses[d] > 0
            ? static_cast<double>(positive_advantages[d]) / static_cast<double>(total_responses[d])
            : 0.0;
    report.datasets.push_back(std::move(s));
  }

  const double n = static_cast<double>(entropy_trace.size());
  const double mean = std::accumulate(entropy_trace.begin(), entropy_trace.end(), 0.0) / n;
  double var = 0.0;
  for (double e : entropy_trace) {
    var += (e - mean) * (e - mean);
  }
  report.entropy_mean = mean;
  report.entropy_variance = var / n;
  report.entropy_min = *std::min_element(entropy_trace.begin(), entropy_trace.end());
  report.entropy_max = *std::max_element(entropy_trace.begin(), entropy_trace.end());
  report.mean_clipped_fraction = options.steps > 0 ? clipped_sum / options.steps : 0.0;
  return report;
}

void write_report_csv(const RunReport& report, const std::string& path,
                      const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  out << "# config_hash=" << config_hash << " seed=" << report.seed
      << " mode=" << to_string(report.mode) << "\n";
  out << "step,dataset_id,greedy_content,mean_raw_reward,mean_norm_reward,entropy,clipped_fraction\n";
  for (const auto& row : report.rows) {
    out << row.step << ',' << row.dataset_id << ',' << fmt(row.greedy_content) << ','
        << fmt(row.mean_raw_reward) << ',' << fmt(row.mean_norm_reward) << ','
        << fmt(row.entropy) << ',' << fmt(row.clipped_fraction) << "\n";
  }
  if (!out) {
    throw IoError("failed writing " + path);
  }
}

void write_report_summary_json(const RunReport& report, const std::string& path,
                               const std::string& config_hash) {
  nlohmann::json doc;
  doc["config_hash"] = config_hash;
  doc["seed"] = report.seed;
  doc["mode"] = to_string(report.mode);
  doc["steps"] = report.steps;
  doc["datasets"] = nlohmann::json::object();
  for (const auto& s : report.datasets) {
    doc["datasets"][s.dataset_id] = {
        {"initial_greedy", s.initial_greedy},
        {"final_greedy", s.final_greedy},
        {"improvement", s.improvement},
        {"final_entropy", s.final_entropy},
        {"positive_advantage_share", s.positive_advantage_share},
    };
  }
  doc["entropy_trace"] = {
      {"mean", report.entropy_mean},
      {"variance", report.entropy_variance},
      {"min", report.entropy_min},
      {"max", report.entropy_max},
  };
  doc["mean_clipped_fraction"] = report.mean_clipped_fraction;

  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  out << doc.dump(2) << "\n";
  if (!out) {
    throw IoError("failed writing " + path);
  }
}

}  // namespace medgrpo::sim
