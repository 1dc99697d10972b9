#pragma once

#include <map>
#include <span>
#include <string>
#include <tuple>

#include "medgrpo/task.hpp"

namespace medgrpo::norm {

inline constexpr double kDefaultSlope = 3.0;
inline constexpr double kDefaultIqrFloor = 1e-3;

// Frozen percentile summary of one dataset/task/channel score distribution.
// Fitted offline on baseline scores; training never refits.
struct PercentileStats {
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
  double k = kDefaultSlope;
  double iqr_floor = kDefaultIqrFloor;

  double effective_iqr() const;
  void validate() const;  // throws ValidationError
};

// Percentile by linear interpolation between order statistics. q in [0, 1].
double percentile(std::span<const double> sorted_scores, double q);

// Fits p25/p50/p75 from raw scores. Requires at least 4 finite scores.
PercentileStats fit_percentile_stats(std::span<const double> scores, double k = kDefaultSlope,
                                     double iqr_floor = kDefaultIqrFloor);

// Logistic squash centered on the median and scaled by the effective IQR:
//   r(x) = 1 / (1 + exp(-k * (x - p50) / effective_iqr))
// The median maps to 0.5 exactly and the map is strictly increasing.
double normalize(const PercentileStats& stats, double x);

// dr/dx = (k / effective_iqr) * r * (1 - r); strictly positive.
double normalize_derivative(const PercentileStats& stats, double x);

// Stats entries keyed by (dataset, task, channel). Grounding tasks use the
// content channel only; caption tasks carry a judge-channel entry as well.
class StatsTable {
 public:
  using Key = std::tuple<std::string, TaskKind, RewardChannel>;

  void insert(const std::string& dataset_id, TaskKind task, RewardChannel channel,
              const PercentileStats& stats);
  const PercentileStats& at(const std::string& dataset_id, TaskKind task,
                            RewardChannel channel = RewardChannel::kContent) const;
  bool contains(const std::string& dataset_id, TaskKind task,
                RewardChannel channel = RewardChannel::kContent) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<Key, PercentileStats>& entries() const { return entries_; }

 private:
  std::map<Key, PercentileStats> entries_;
};

// JSON round trip. Schema: {"entries": [{"dataset", "task", "channel",
// "p25", "p50", "p75", "k", "iqr_floor"}]}; "channel" defaults to "content"
// when absent. Load validates every entry.
void save_stats(const StatsTable& table, const std::string& path);
StatsTable load_stats(const std::string& path);

}  // namespace medgrpo::norm
