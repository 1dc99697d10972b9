#include "medgrpo/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "medgrpo/errors.hpp"

namespace medgrpo::norm {

double PercentileStats::effective_iqr() const { return std::max(p75 - p25, iqr_floor); }

void PercentileStats::validate() const {
  if (!std::isfinite(p25) || !std::isfinite(p50) || !std::isfinite(p75)) {
    throw ValidationError("PercentileStats: percentiles must be finite");
  }
  if (!(p25 <= p50 && p50 <= p75)) {
    throw ValidationError("PercentileStats: requires p25 <= p50 <= p75");
  }
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw ValidationError("PercentileStats: slope k must be positive");
  }
  if (!(iqr_floor > 0.0) || !std::isfinite(iqr_floor)) {
    throw ValidationError("PercentileStats: iqr_floor must be positive");
  }
}

double percentile(std::span<const double> sorted_scores, double q) {
  if (sorted_scores.empty()) throw ValidationError("percentile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("percentile: q must lie in [0, 1]");
  double h = q * static_cast<double>(sorted_scores.size() - 1);
  std::size_t lo = static_cast<std::size_t>(h);
  std::size_t hi = std::min(lo + 1, sorted_scores.size() - 1);
  double frac = h - static_cast<double>(lo);
  return sorted_scores[lo] + frac * (sorted_scores[hi] - sorted_scores[lo]);
}

PercentileStats fit_percentile_stats(std::span<const double> scores, double k, double iqr_floor) {
  if (scores.size() < 4) {
    throw FittingError("fit_percentile_stats: needs at least 4 scores, got " +
                       std::to_string(scores.size()));
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  for (double s : sorted) {
    if (!std::isfinite(s)) throw FittingError("fit_percentile_stats: scores must be finite");
  }
  std::sort(sorted.begin(), sorted.end());
  PercentileStats stats;
  stats.p25 = percentile(sorted, 0.25);
  stats.p50 = percentile(sorted, 0.50);
  stats.p75 = percentile(sorted, 0.75);
  stats.k = k;
  stats.iqr_floor = iqr_floor;
  stats.validate();
  return stats;
}

double normalize(const PercentileStats& stats, double x) {
  stats.validate();
  if (!std::isfinite(x)) throw ValidationError("normalize: score must be finite");
  double z = stats.k * (x - stats.p50) / stats.effective_iqr();
  // Branch keeps exp's argument non-positive so extreme scores saturate
  // instead of overflowing.
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

double normalize_derivative(const PercentileStats& stats, double x) {
  double r = normalize(stats, x);
  return stats.k / stats.effective_iqr() * r * (1.0 - r);
}

void StatsTable::insert(const std::string& dataset_id, TaskKind task, RewardChannel channel,
                        const PercentileStats& stats) {
  stats.validate();
  entries_[Key{dataset_id, task, channel}] = stats;
}

const PercentileStats& StatsTable::at(const std::string& dataset_id, TaskKind task,
                                      RewardChannel channel) const {
  auto it = entries_.find(Key{dataset_id, task, channel});
  if (it == entries_.end()) {
    throw LookupError("StatsTable: no entry for (" + dataset_id + ", " + to_string(task) + ", " +
                      to_string(channel) + ")");
  }
  return it->second;
}

bool StatsTable::contains(const std::string& dataset_id, TaskKind task,
                          RewardChannel channel) const {
  return entries_.count(Key{dataset_id, task, channel}) > 0;
}

void save_stats(const StatsTable& table, const std::string& path) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [key, stats] : table.entries()) {
    const auto& [dataset, task, channel] = key;
    entries.push_back({{"dataset", dataset},
                       {"task", to_string(task)},
                       {"channel", to_string(channel)},
                       {"p25", stats.p25},
                       {"p50", stats.p50},
                       {"p75", stats.p75},
                       {"k", stats.k},
                       {"iqr_floor", stats.iqr_floor}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("save_stats: cannot open '" + path + "' for writing");
  out << nlohmann::json{{"entries", entries}}.dump(2) << "\n";
  if (!out) throw IoError("save_stats: write to '" + path + "' failed");
}

StatsTable load_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_stats: cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_stats: '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.contains("entries") || !doc["entries"].is_array()) {
    throw IoError("load_stats: '" + path + "' lacks an 'entries' array");
  }
  StatsTable table;
  for (const auto& entry : doc["entries"]) {
    try {
      PercentileStats stats;
      stats.p25 = entry.at("p25").get<double>();
      stats.p50 = entry.at("p50").get<double>();
      stats.p75 = entry.at("p75").get<double>();
      stats.k = entry.value("k", kDefaultSlope);
      stats.iqr_floor = entry.value("iqr_floor", kDefaultIqrFloor);
      auto task = parse_task_kind(entry.at("task").get<std::string>());
      auto channel = parse_reward_channel(entry.value("channel", std::string("content")));
      table.insert(entry.at("dataset").get<std::string>(), task, channel, stats);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("load_stats: malformed entry in '" + path + "': " + e.what());
    }
  }
  return table;
}

}  // namespace medgrpo::norm
