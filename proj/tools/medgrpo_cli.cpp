#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "medgrpo/errors.hpp"
#include "medgrpo/judge_client.hpp"
#include "medgrpo/mock_judge_server.hpp"
#include "medgrpo/normalization.hpp"
#include "medgrpo/run_config.hpp"
#include "medgrpo/simenv.hpp"
#include "medgrpo/svg_plot.hpp"

namespace {

using namespace medgrpo;

ExecMode parse_exec(const std::string& text) {
  if (text == "serial") {
    return ExecMode::kSerial;
  }
  if (text == "parallel") {
    return ExecMode::kParallel;
  }
  throw ConfigError("unknown exec mode: " + text + " (expected serial or parallel)");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + dir + ": " + ec.message());
  }
}

std::string footer_for(const cfg::RunConfig& rc, const std::string& extra) {
  return "config=" + rc.hash + " seed=" + std::to_string(rc.train.seed) +
         (extra.empty() ? "" : " " + extra);
}

// Rows arrive grouped per step in dataset order; pull one dataset's column.
svg::Series dataset_series(const sim::RunReport& report, const std::string& dataset_id,
                           double sim::StepRow::* field, const std::string& label) {
  svg::Series s;
  s.label = label;
  for (const auto& row : report.rows) {
    if (row.dataset_id == dataset_id) {
      s.xs.push_back(static_cast<double>(row.step));
      s.ys.push_back(row.*field);
    }
  }
  return s;
}

std::vector<double> overall_entropy(const sim::RunReport& report,
                                    const std::map<std::string, int>& prompt_counts) {
  const std::size_t per_step = prompt_counts.size();
  int total = 0;
  for (const auto& [id, n] : prompt_counts) {
    total += n;
  }
  std::vector<double> trace;
  double acc = 0.0;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    acc += report.rows[i].entropy * prompt_counts.at(report.rows[i].dataset_id);
    if ((i + 1) % per_step == 0) {
      trace.push_back(acc / total);
      acc = 0.0;
    }
  }
  return trace;
}

void write_run_outputs(const cfg::RunConfig& rc, const sim::RunReport& report,
                       const std::string& out_dir) {
  const std::string mode = sim::to_string(report.mode);
  sim::write_report_csv(report, out_dir + "/run_" + mode + ".csv", rc.hash);
  sim::write_report_summary_json(report, out_dir + "/summary_" + mode + ".json", rc.hash);

  svg::PlotSpec entropy;
  entropy.title = "Policy entropy per dataset (" + mode + ")";
  entropy.x_label = "step";
  entropy.y_label = "entropy (nats)";
  entropy.footer = footer_for(rc, "mode=" + mode);
  svg::PlotSpec greedy;
  greedy.title = "Greedy content score per dataset (" + mode + ")";
  greedy.x_label = "step";
  greedy.y_label = "content score";
  greedy.footer = entropy.footer;
  for (const auto& spec : rc.datasets) {
    entropy.series.push_back(
        dataset_series(report, spec.dataset_id, &sim::StepRow::entropy, spec.dataset_id));
    greedy.series.push_back(
        dataset_series(report, spec.dataset_id, &sim::StepRow::greedy_content, spec.dataset_id));
  }
  svg::write_line_plot(entropy, out_dir + "/entropy_" + mode + ".svg");
  svg::write_line_plot(greedy, out_dir + "/greedy_" + mode + ".svg");
}

void print_report(const sim::RunReport& report) {
  std::cout << "mode=" << sim::to_string(report.mode) << " steps=" << report.steps
            << " seed=" << report.seed << "\n";
  for (const auto& d : report.datasets) {
    std::cout << "  " << d.dataset_id << ": greedy " << d.initial_greedy << " -> "
              << d.final_greedy << " (improvement " << d.improvement << "), final entropy "
              << d.final_entropy << ", positive advantage share " << d.positive_advantage_share
              << "\n";
  }
  std::cout << "  entropy trace: mean " << report.entropy_mean << ", variance "
            << report.entropy_variance << ", range [" << report.entropy_min << ", "
            << report.entropy_max << "]\n";
  std::cout << "  mean clipped fraction: " << report.mean_clipped_fraction << "\n";
}

norm::StatsTable fit_stats_for(const sim::SyntheticEnv& env, const grpo::TrainConfig& train,
                               int samples) {
  const ToyPolicy policy = ToyPolicy::zeros(env.num_candidates, env.num_features());
  return sim::fit_baseline_stats(env, policy, train, samples);
}

int run_train(const std::string& config_path, const std::string& mode_override, int steps_override,
              std::int64_t seed_override, const std::string& stats_path,
              const std::string& out_dir_override, const std::string& exec_name, int samples) {
  cfg::RunConfig rc = cfg::load_run_config(config_path);
  if (!mode_override.empty()) {
    rc.mode = sim::parse_score_mode(mode_override);
  }
  if (steps_override >= 0) {
    rc.steps = steps_override;
    rc.train.gradient_steps = steps_override;
  }
  if (seed_override >= 0) {
    rc.train.seed = static_cast<std::uint64_t>(seed_override);
  }
  const std::string out_dir = out_dir_override.empty() ? rc.output_dir : out_dir_override;
  const ExecMode exec = parse_exec(exec_name);

  const auto env = sim::build_environment(rc.datasets, rc.train.seed, exec);

  norm::StatsTable stats;
  if (rc.mode == sim::ScoreMode::kNormalized) {
    if (!stats_path.empty()) {
      stats = norm::load_stats(stats_path);
    } else {
      stats = fit_stats_for(env, rc.train, samples);
    }
  }

  sim::RunOptions options;
  options.mode = rc.mode;
  options.steps = rc.steps;
  options.stats = rc.mode == sim::ScoreMode::kNormalized ? &stats : nullptr;
  options.exec = exec;

  const auto report = sim::run_experiment(env, rc.train, options);
  ensure_dir(out_dir);
  if (rc.mode == sim::ScoreMode::kNormalized && stats_path.empty()) {
    norm::save_stats(stats, out_dir + "/stats.json");
  }
  write_run_outputs(rc, report, out_dir);
  print_report(report);
  std::cout << "outputs written to " << out_dir << "\n";
  return 0;
}

int run_ablation(const std::string& config_path, int steps_override, const std::string& seeds_text,
                 const std::string& out_dir_override, const std::string& exec_name, int samples) {
  cfg::RunConfig rc = cfg::load_run_config(config_path);
  if (steps_override >= 0) {
    rc.steps = steps_override;
    rc.train.gradient_steps = steps_override;
  }
  const std::string out_dir = out_dir_override.empty() ? rc.output_dir : out_dir_override;
  const ExecMode exec = parse_exec(exec_name);

  std::vector<std::uint64_t> seeds;
  std::stringstream ss(seeds_text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      seeds.push_back(std::stoull(part));
    } catch (const std::exception&) {
      throw ConfigError("bad seed list entry: " + part);
    }
  }
  if (seeds.empty()) {
    throw ConfigError("seed list is empty");
  }

  std::map<std::string, int> prompt_counts;
  for (const auto& spec : rc.datasets) {
    prompt_counts[spec.dataset_id] = spec.num_prompts;
  }

  ensure_dir(out_dir);
  svg::PlotSpec overlay;
  overlay.title = "Mean policy entropy, raw vs normalized rewards";
  overlay.x_label = "step";
  overlay.y_label = "entropy (nats)";
  overlay.footer = footer_for(rc, "seeds=" + seeds_text);

  nlohmann::json summary;
  summary["config_hash"] = rc.hash;
  summary["steps"] = rc.steps;
  summary["runs"] = nlohmann::json::array();

  for (std::size_t si = 0; si < seeds.size(); ++si) {
    rc.train.seed = seeds[si];
    const auto env = sim::build_environment(rc.datasets, rc.train.seed, exec);
    const auto stats = fit_stats_for(env, rc.train, samples);

    nlohmann::json seed_entry;
    seed_entry["seed"] = seeds[si];
    for (const sim::ScoreMode mode : {sim::ScoreMode::kNormalized, sim::ScoreMode::kRaw}) {
      sim::RunOptions options;
      options.mode = mode;
      options.steps = rc.steps;
      options.stats = mode == sim::ScoreMode::kNormalized ? &stats : nullptr;
      options.exec = exec;
      const auto report = sim::run_experiment(env, rc.train, options);

      const std::string tag = sim::to_string(mode) + "_seed" + std::to_string(seeds[si]);
      sim::write_report_csv(report, out_dir + "/run_" + tag + ".csv", rc.hash);
      sim::write_report_summary_json(report, out_dir + "/summary_" + tag + ".json", rc.hash);

      svg::Series s;
      s.label = si == 0 ? sim::to_string(mode) : "";
      s.color = mode == sim::ScoreMode::kNormalized ? "#1f6feb" : "#d1242f";
      const auto trace = overall_entropy(report, prompt_counts);
      for (std::size_t i = 0; i < trace.size(); ++i) {
        s.xs.push_back(static_cast<double>(i));
        s.ys.push_back(trace[i]);
      }
      overlay.series.push_back(std::move(s));

      nlohmann::json mode_entry;
      mode_entry["entropy_variance"] = report.entropy_variance;
      mode_entry["entropy_mean"] = report.entropy_mean;
      mode_entry["mean_clipped_fraction"] = report.mean_clipped_fraction;
      for (const auto& d : report.datasets) {
        mode_entry["initial_greedy"][d.dataset_id] = d.initial_greedy;
        mode_entry["final_greedy"][d.dataset_id] = d.final_greedy;
        mode_entry["improvement"][d.dataset_id] = d.improvement;
        mode_entry["final_entropy"][d.dataset_id] = d.final_entropy;
        mode_entry["positive_advantage_share"][d.dataset_id] = d.positive_advantage_share;
      }
      seed_entry[sim::to_string(mode)] = std::move(mode_entry);

      std::cout << "seed " << seeds[si] << " ";
      print_report(report);
    }
    summary["runs"].push_back(std::move(seed_entry));
  }

  svg::write_line_plot(overlay, out_dir + "/entropy_overlay.svg");
  std::ofstream sf(out_dir + "/ablation_summary.json");
  if (!sf) {
    throw IoError("cannot write ablation summary");
  }
  sf << summary.dump(2) << "\n";
  std::cout << "ablation outputs written to " << out_dir << "\n";
  return 0;
}

int run_fit_stats(const std::string& config_path, const std::string& scores_path,
                  const std::string& output, const std::string& exec_name, int samples, double k,
                  double iqr_floor) {
  norm::StatsTable table;
  if (!scores_path.empty()) {
    // Offline fit from a score dump: dataset,task,score per line. A ".judge"
    // suffix on the task column selects the judge channel.
    std::ifstream in(scores_path);
    if (!in) {
      throw IoError("cannot open " + scores_path);
    }
    std::map<std::tuple<std::string, TaskKind, RewardChannel>, std::vector<double>> buckets;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#' || (line_no == 1 && line.rfind("dataset,", 0) == 0)) {
        continue;
      }
      std::stringstream row(line);
      std::string dataset;
      std::string task_text;
      std::string score_text;
      if (!std::getline(row, dataset, ',') || !std::getline(row, task_text, ',') ||
          !std::getline(row, score_text)) {
        throw ConfigError(scores_path + ":" + std::to_string(line_no) +
                          ": expected dataset,task,score");
      }
      RewardChannel channel = RewardChannel::kContent;
      const auto dot = task_text.find('.');
      if (dot != std::string::npos) {
        channel = parse_reward_channel(task_text.substr(dot + 1));
        task_text = task_text.substr(0, dot);
      }
      try {
        buckets[{dataset, parse_task_kind(task_text), channel}].push_back(std::stod(score_text));
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError(scores_path + ":" + std::to_string(line_no) + ": bad score value");
      }
    }
    for (const auto& [key, scores] : buckets) {
      try {
        table.insert(std::get<0>(key), std::get<1>(key), std::get<2>(key),
                     norm::fit_percentile_stats(scores, k, iqr_floor));
      } catch (const FittingError& e) {
        throw ConfigError(std::get<0>(key) + "/" + to_string(std::get<1>(key)) + "/" +
                          to_string(std::get<2>(key)) + ": " + e.what());
      }
    }
  } else if (!config_path.empty()) {
    const cfg::RunConfig rc = cfg::load_run_config(config_path);
    const ExecMode exec = parse_exec(exec_name);
    const auto env = sim::build_environment(rc.datasets, rc.train.seed, exec);
    table = fit_stats_for(env, rc.train, samples);
  } else {
    throw ConfigError("fit-stats needs --config or --scores");
  }

  norm::save_stats(table, output);
  std::cout << "fitted " << table.size() << " stats entries -> " << output << "\n";
  for (const auto& [key, stats] : table.entries()) {
    std::cout << "  " << std::get<0>(key) << "/" << to_string(std::get<1>(key)) << "/"
              << to_string(std::get<2>(key)) << ": p25 " << stats.p25 << ", p50 " << stats.p50
              << ", p75 " << stats.p75 << "\n";
  }
  return 0;
}

int run_judge_test(bool mock, const std::string& endpoint, const std::string& model,
                   const std::string& generated, const std::string& reference,
                   const std::string& task_text, const std::string& stats_path,
                   const std::string& stats_dataset) {
  judge::JudgeRequest request;
  request.generated = generated;
  request.reference = reference;
  request.task = parse_task_kind(task_text);

  judge::MockJudgeServer server;
  judge::JudgeConfig config;
  config.model = model;
  if (mock) {
    config.endpoint = server.start();
    std::cout << "mock judge listening at " << config.endpoint << "\n";
  } else {
    if (endpoint.empty()) {
      throw ConfigError("judge-test needs --mock or --endpoint");
    }
    config.endpoint = endpoint;
    if (const char* key = std::getenv("MEDGRPO_JUDGE_API_KEY")) {
      config.api_key = key;
    }
  }

  const auto scores = judge::judge_call(config, request);
  std::cout << judge::render_judge_scores(scores);
  std::cout << "mean score: " << scores.mean() << "\n";

  if (!stats_path.empty()) {
    if (stats_dataset.empty()) {
      throw ConfigError("--stats needs --dataset to pick the entry");
    }
    const auto table = norm::load_stats(stats_path);
    const auto& entry = table.at(stats_dataset, request.task, RewardChannel::kJudge);
    std::cout << "normalized (" << stats_dataset << " stats): "
              << norm::normalize(entry, scores.mean()) << "\n";
  } else {
    // Identity-style stats (p25 = 2, p50 = 3, p75 = 4) map the 1..5 scale
    // onto the logistic curve for a quick feel of the normalized component.
    norm::PercentileStats identity;
    identity.p25 = 2.0;
    identity.p50 = 3.0;
    identity.p75 = 4.0;
    std::cout << "normalized (identity stats): " << norm::normalize(identity, scores.mean())
              << "\n";
  }
  if (mock) {
    server.stop();
  }
  return 0;
}

int run_dump_baseline(const std::string& config_path, const std::string& output,
                      const std::string& exec_name) {
  const cfg::RunConfig rc = cfg::load_run_config(config_path);
  const auto env = sim::build_environment(rc.datasets, rc.train.seed, parse_exec(exec_name));

  nlohmann::json doc;
  doc["config_hash"] = rc.hash;
  doc["seed"] = rc.train.seed;
  doc["datasets"] = nlohmann::json::array();
  for (std::size_t d = 0; d < env.specs.size(); ++d) {
    nlohmann::json entry;
    entry["dataset_id"] = env.specs[d].dataset_id;
    entry["task"] = to_string(env.specs[d].task);
    std::vector<double> all;
    entry["prompts"] = nlohmann::json::array();
    for (int p : env.prompts_of[d]) {
      const auto& prompt = env.prompts[static_cast<std::size_t>(p)];
      entry["prompts"].push_back({{"prompt_id", prompt.prompt_id},
                                  {"best_candidate", prompt.best_candidate},
                                  {"latent_scores", prompt.latent_scores}});
      all.insert(all.end(), prompt.latent_scores.begin(), prompt.latent_scores.end());
    }
    std::sort(all.begin(), all.end());
    entry["latent_summary"] = {
        {"p25", norm::percentile(all, 0.25)},
        {"p50", norm::percentile(all, 0.5)},
        {"p75", norm::percentile(all, 0.75)},
    };
    // What the noisy scoring channel does to those latents, 8 draws each.
    std::vector<double> observed;
    Rng obs_rng(derive_seed(rc.train.seed, 0x6f6273, d));
    for (double latent : all) {
      for (int rep = 0; rep < 8; ++rep) {
        observed.push_back(sim::observe_score(env.specs[d], latent, obs_rng));
      }
    }
    std::sort(observed.begin(), observed.end());
    entry["observed_summary"] = {
        {"p25", norm::percentile(observed, 0.25)},
        {"p50", norm::percentile(observed, 0.5)},
        {"p75", norm::percentile(observed, 0.75)},
        {"floor_fraction",
         static_cast<double>(std::count(observed.begin(), observed.end(), 0.0)) /
             static_cast<double>(observed.size())},
    };
    doc["datasets"].push_back(std::move(entry));
  }

  std::ofstream out(output);
  if (!out) {
    throw IoError("cannot open " + output + " for writing");
  }
  out << doc.dump(2) << "\n";
  std::cout << "environment snapshot -> " << output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GRPO training harness with cross-dataset reward normalization"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mode_override;
  int steps_override = -1;
  std::int64_t seed_override = -1;
  std::string stats_path;
  std::string out_dir;
  std::string exec_name = "parallel";
  std::string seeds_text = "0,1,2,3,4";
  std::string scores_path;
  std::string output = "stats.json";
  int samples = 32;
  bool mock = false;
  std::string endpoint;
  std::string model = "judge-model";
  std::string generated = "grasper retracts the gallbladder while hook cauterizes tissue";
  std::string reference = "a grasper retracts the gallbladder as the hook dissects tissue";
  std::string task_text = "RC";

  auto* train = app.add_subcommand("train", "run one training experiment");
  train->add_option("--config", config_path, "experiment config file")->required();
  train->add_option("--mode", mode_override, "override run.mode (raw|normalized)");
  train->add_option("--steps", steps_override, "override run.steps");
  train->add_option("--seed", seed_override, "override run.seed");
  train->add_option("--stats", stats_path, "use a fitted stats file instead of refitting");
  train->add_option("--out,--out-dir", out_dir, "override run.output_dir");
  train->add_option("--exec", exec_name, "serial|parallel");
  train->add_option("--samples", samples, "stats fitting samples per prompt");

  auto* ablation = app.add_subcommand("ablation", "paired raw vs normalized runs over seeds");
  ablation->add_option("--config", config_path, "experiment config file")->required();
  ablation->add_option("--steps", steps_override, "override run.steps");
  ablation->add_option("--seeds", seeds_text, "comma-separated seed list");
  ablation->add_option("--out,--out-dir", out_dir, "override run.output_dir");
  ablation->add_option("--exec", exec_name, "serial|parallel");
  ablation->add_option("--samples", samples, "stats fitting samples per prompt");

  double fit_k = norm::kDefaultSlope;
  double fit_iqr_floor = norm::kDefaultIqrFloor;
  auto* fit = app.add_subcommand("fit-stats", "fit percentile stats for normalization");
  fit->add_option("--config", config_path, "sample scores from this synthetic setup");
  fit->add_option("--scores", scores_path, "or fit from a dataset,task,score CSV");
  fit->add_option("--output,--out", output, "stats JSON path");
  fit->add_option("--exec", exec_name, "serial|parallel");
  fit->add_option("--samples", samples, "samples per prompt (config mode)");
  fit->add_option("--k", fit_k, "logistic slope");
  fit->add_option("--iqr-floor", fit_iqr_floor, "minimum effective IQR");

  std::string judge_stats_path;
  std::string judge_stats_dataset;
  auto* judge_test = app.add_subcommand("judge-test", "send one request to a judge endpoint");
  judge_test->add_flag("--mock,--mock-judge", mock, "spin up the built-in mock judge");
  judge_test->add_option("--endpoint", endpoint, "judge chat-completions URL");
  judge_test->add_option("--model", model, "judge model name");
  judge_test->add_option("--generated", generated, "generated caption");
  judge_test->add_option("--reference", reference, "reference caption");
  judge_test->add_option("--task", task_text, "task kind (TAG|STG|VS|RC)");
  judge_test->add_option("--stats", judge_stats_path, "normalize with this fitted stats file");
  judge_test->add_option("--dataset", judge_stats_dataset, "stats dataset id (with --stats)");

  auto* dump = app.add_subcommand("dump-baseline", "write the synthetic environment as JSON");
  dump->add_option("--config", config_path, "experiment config file")->required();
  dump->add_option("--output", output, "snapshot JSON path")->required();
  dump->add_option("--exec", exec_name, "serial|parallel");

  try {
    app.parse(argc, argv);
    if (train->parsed()) {
      return run_train(config_path, mode_override, steps_override, seed_override, stats_path,
                       out_dir, exec_name, samples);
    }
    if (ablation->parsed()) {
      return run_ablation(config_path, steps_override, seeds_text, out_dir, exec_name, samples);
    }
    if (fit->parsed()) {
      return run_fit_stats(config_path, scores_path, output, exec_name, samples, fit_k,
                           fit_iqr_floor);
    }
    if (judge_test->parsed()) {
      return run_judge_test(mock, endpoint, model, generated, reference, task_text,
                            judge_stats_path, judge_stats_dataset);
    }
    if (dump->parsed()) {
      return run_dump_baseline(config_path, output, exec_name);
    }
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
