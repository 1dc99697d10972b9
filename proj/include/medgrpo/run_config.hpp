#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medgrpo/grpo.hpp"
#include "medgrpo/simenv.hpp"

namespace medgrpo::cfg {

// Experiment configuration loaded from a small TOML subset:
//   - [section] headers and key = value lines
//   - values: "strings", integers, floats, true/false
//   - # comments, blank lines
// No arrays, no nested tables. Sections: [run], [train], and one
// [dataset.<id>] per synthetic dataset. Unknown sections or keys are errors;
// typos should not silently fall back to defaults.
struct RunConfig {
  sim::ScoreMode mode = sim::ScoreMode::kNormalized;
  int steps = 2000;
  std::string output_dir = "out";
  grpo::TrainConfig train;  // train.seed comes from run.seed
  std::vector<sim::SyntheticDatasetSpec> datasets;
  std::string hash;  // FNV-1a of the config text, stamped into outputs

  void validate() const;  // throws ConfigError
};

// FNV-1a 64-bit of the raw text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace medgrpo::cfg
