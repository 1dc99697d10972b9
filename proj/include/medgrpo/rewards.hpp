#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "medgrpo/embedding.hpp"
#include "medgrpo/judge.hpp"
#include "medgrpo/metrics.hpp"
#include "medgrpo/normalization.hpp"
#include "medgrpo/task.hpp"

namespace medgrpo::rewards {

inline constexpr double kDefaultFormatPenalty = 0.6;

// Ground truth for one prompt: intervals for TAG, a track for STG, the
// reference caption for VS/RC.
using GroundTruth =
    std::variant<std::vector<metrics::TemporalInterval>, metrics::FrameTrack, std::string>;

struct TaskSample {
  std::string dataset_id;
  TaskKind task = TaskKind::kTAG;
  GroundTruth ground_truth;
};

using AnswerPayload =
    std::variant<std::monostate, std::vector<metrics::TemporalInterval>, metrics::FrameTrack,
                 std::string>;

// valid=false carries an empty payload; parsing never throws on malformed
// model output.
struct ParsedAnswer {
  bool valid = false;
  AnswerPayload payload;
};

// Task-specific answer grammars:
//   TAG  one interval per line (or comma-separated), "12.0-34.5" or
//        "12.0–34.5"; seconds must be finite, non-negative, start <= end.
//   STG  one frame per line, "<frame>: [x1, y1, x2, y2]" with coordinates in
//        [0, 1], x1 <= x2, y1 <= y2; duplicate frame indices are malformed.
//   VS/RC free text, valid iff non-empty after trimming.
ParsedAnswer parse_answer(TaskKind task, const std::string& text);

// 1.0 for a valid parse, 1.0 - penalty otherwise (0.4 at the default 0.6).
double format_reward(const ParsedAnswer& parsed, double penalty = kDefaultFormatPenalty);

// Full composition record for one response.
struct RewardBreakdown {
  double raw_content = 0.0;        // metric value (grounding) or raw cosine (captions)
  double normalized_content = 0.0;
  double format_factor = 1.0;
  std::optional<double> similarity_component;
  std::optional<double> judge_component;
  std::optional<double> raw_judge_score;
  bool judge_fallback = false;  // judge channel replaced by similarity after failures
  double final = 0.0;
};

// Grounding composition on an already-computed content score:
// final = normalize(raw_content) * format_factor. Shared by grounding_reward
// and the synthetic environment.
RewardBreakdown compose_grounding(const norm::PercentileStats& stats, double raw_content,
                                  bool valid_parse, double penalty = kDefaultFormatPenalty);

// TAG/STG reward: content metric vs. ground truth (0 on invalid parse),
// logistic normalization, multiplicative format factor. For TAG the content
// score averages over ground-truth positions, with absent predicted
// intervals contributing 0, mirroring how STG treats missing frames.
RewardBreakdown grounding_reward(const TaskSample& sample, const ParsedAnswer& parsed,
                                 const norm::StatsTable& stats,
                                 double penalty = kDefaultFormatPenalty);

// Scores a caption pair; throws JudgeUnavailableError when the backing
// endpoint stays down after retries.
class JudgeProvider {
 public:
  virtual ~JudgeProvider() = default;
  virtual judge::JudgeScores score(const judge::JudgeRequest& request) = 0;
};

// In-process provider wrapping the deterministic token-overlap mock.
class MockJudgeProvider : public JudgeProvider {
 public:
  judge::JudgeScores score(const judge::JudgeRequest& request) override {
    return judge::mock_judge(request);
  }
};

// VS/RC reward: equal-weighted average of the normalized similarity channel
// and the normalized judge channel. An invalid caption parse floors both raw
// channel scores at their minima (cosine 0, judge mean 1) instead of taking
// the grounding format factor. When the judge is unavailable the judge
// component falls back to the similarity component, so the final reward
// degrades to similarity alone; an embedder failure propagates.
RewardBreakdown caption_reward(const TaskSample& sample, const ParsedAnswer& parsed,
                               const norm::StatsTable& stats, JudgeProvider& judge_provider,
                               EmbeddingProvider& embedder);

// Parses the response and routes to the task's reward path.
RewardBreakdown dispatch_reward(const TaskSample& sample, const std::string& response_text,
                                const norm::StatsTable& stats, JudgeProvider& judge_provider,
                                EmbeddingProvider& embedder,
                                double penalty = kDefaultFormatPenalty);

}  // namespace medgrpo::rewards
