#include "medgrpo/rewards.hpp"

#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "medgrpo/errors.hpp"

namespace medgrpo::rewards {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b])) != 0) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])) != 0) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

bool parse_number(const std::string& text, double* out) {
  std::string t = trim(text);
  if (t.empty()) return false;
  std::size_t consumed = 0;
  double value;
  try {
    value = std::stod(t, &consumed);
  } catch (const std::exception&) {
    return false;
  }
  if (consumed != t.size() || !std::isfinite(value)) return false;
  *out = value;
  return true;
}

// "12.0-34.5" or "12.0–34.5"; times are non-negative so a '-' past the first
// character can only be the separator.
bool parse_interval(const std::string& text, metrics::TemporalInterval* out) {
  static const std::string kEnDash = "–";
  std::string t = trim(text);
  std::size_t sep_pos = std::string::npos;
  std::size_t sep_len = 0;
  std::size_t dash = t.find(kEnDash);
  if (dash != std::string::npos) {
    sep_pos = dash;
    sep_len = kEnDash.size();
  } else {
    std::size_t hyphen = t.find('-', 1);
    if (hyphen != std::string::npos) {
      sep_pos = hyphen;
      sep_len = 1;
    }
  }
  if (sep_pos == std::string::npos) return false;
  double start;
  double end;
  if (!parse_number(t.substr(0, sep_pos), &start)) return false;
  if (!parse_number(t.substr(sep_pos + sep_len), &end)) return false;
  out->start = start;
  out->end = end;
  return out->is_valid();
}

ParsedAnswer parse_tag(const std::string& text) {
  std::vector<std::string> chunks;
  for (const std::string& line : split_lines(text)) {
    std::istringstream in(line);
    std::string piece;
    while (std::getline(in, piece, ',')) {
      piece = trim(piece);
      if (!piece.empty()) chunks.push_back(piece);
    }
  }
  if (chunks.empty()) return {};
  std::vector<metrics::TemporalInterval> intervals;
  intervals.reserve(chunks.size());
  for (const std::string& chunk : chunks) {
    metrics::TemporalInterval iv;
    if (!parse_interval(chunk, &iv)) return {};
    intervals.push_back(iv);
  }
  return {true, std::move(intervals)};
}

// "<frame>: [x1, y1, x2, y2]"
ParsedAnswer parse_stg(const std::string& text) {
  std::vector<std::string> lines = split_lines(text);
  if (lines.empty()) return {};
  metrics::FrameTrack track;
  for (const std::string& line : lines) {
    std::size_t colon = line.find(':');
    if (colon == std::string::npos) return {};
    std::string frame_part = trim(line.substr(0, colon));
    if (frame_part.empty() ||
        frame_part.find_first_not_of("0123456789") != std::string::npos) {
      return {};
    }
    long frame;
    try {
      frame = std::stol(frame_part);
    } catch (const std::exception&) {
      return {};
    }
    std::string box_part = trim(line.substr(colon + 1));
    if (box_part.size() < 2 || box_part.front() != '[' || box_part.back() != ']') return {};
    std::istringstream in(box_part.substr(1, box_part.size() - 2));
    double coords[4];
    std::string piece;
    int n = 0;
    while (std::getline(in, piece, ',')) {
      if (n >= 4 || !parse_number(piece, &coords[n])) return {};
      ++n;
    }
    if (n != 4) return {};
    metrics::BBox box{coords[0], coords[1], coords[2], coords[3]};
    bool in_unit_square = box.x1 >= 0.0 && box.y1 >= 0.0 && box.x2 <= 1.0 && box.y2 <= 1.0;
    if (!box.is_valid() || !in_unit_square) return {};
    if (track.frames.count(static_cast<int>(frame)) > 0) return {};
    track.frames[static_cast<int>(frame)] = box;
  }
  return {true, std::move(track)};
}

}  // namespace

ParsedAnswer parse_answer(TaskKind task, const std::string& text) {
  switch (task) {
    case TaskKind::kTAG:
      return parse_tag(text);
    case TaskKind::kSTG:
      return parse_stg(text);
    case TaskKind::kVS:
    case TaskKind::kRC: {
      std::string t = trim(text);
      if (t.empty()) return {};
      return {true, std::move(t)};
    }
  }
  throw ConfigError("parse_answer: unknown task kind");
}

double format_reward(const ParsedAnswer& parsed, double penalty) {
  if (!(penalty >= 0.0 && penalty <= 1.0)) {
    throw ValidationError("format_reward: penalty must lie in [0, 1]");
  }
  return parsed.valid ? 1.0 : 1.0 - penalty;
}

RewardBreakdown compose_grounding(const norm::PercentileStats& stats, double raw_content,
                                  bool valid_parse, double penalty) {
  RewardBreakdown bd;
  bd.raw_content = raw_content;
  bd.normalized_content = norm::normalize(stats, raw_content);
  bd.format_factor = format_reward(ParsedAnswer{valid_parse, {}}, penalty);
  bd.final = bd.normalized_content * bd.format_factor;
  return bd;
}

namespace {

double tag_content_score(const std::vector<metrics::TemporalInterval>& preds,
                         const std::vector<metrics::TemporalInterval>& gts) {
  if (gts.empty()) throw ValidationError("grounding_reward: TAG ground truth is empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (i < preds.size()) sum += metrics::temporal_iou(preds[i], gts[i]);
  }
  return sum / static_cast<double>(gts.size());
}

}  // namespace

RewardBreakdown grounding_reward(const TaskSample& sample, const ParsedAnswer& parsed,
                                 const norm::StatsTable& stats, double penalty) {
  double raw = 0.0;
  if (sample.task == TaskKind::kTAG) {
    const auto& gt = std::get<std::vector<metrics::TemporalInterval>>(sample.ground_truth);
    if (parsed.valid) {
      raw = tag_content_score(std::get<std::vector<metrics::TemporalInterval>>(parsed.payload),
                              gt);
    }
  } else if (sample.task == TaskKind::kSTG) {
    const auto& gt = std::get<metrics::FrameTrack>(sample.ground_truth);
    if (parsed.valid) {
      raw = metrics::stg_miou(std::get<metrics::FrameTrack>(parsed.payload), gt);
    } else if (gt.frames.empty()) {
      throw ValidationError("grounding_reward: STG ground truth has no frames");
    }
  } else {
    throw ConfigError("grounding_reward: task must be TAG or STG, got " +
                      to_string(sample.task));
  }
  const auto& entry = stats.at(sample.dataset_id, sample.task, RewardChannel::kContent);
  return compose_grounding(entry, raw, parsed.valid, penalty);
}

RewardBreakdown caption_reward(const TaskSample& sample, const ParsedAnswer& parsed,
                               const norm::StatsTable& stats, JudgeProvider& judge_provider,
                               EmbeddingProvider& embedder) {
  if (sample.task != TaskKind::kVS && sample.task != TaskKind::kRC) {
    throw ConfigError("caption_reward: task must be VS or RC, got " + to_string(sample.task));
  }
  const std::string& reference = std::get<std::string>(sample.ground_truth);

  RewardBreakdown bd;
  bd.format_factor = format_reward(parsed);

  double raw_similarity = 0.0;
  double raw_judge = 1.0;  // channel minima stand in for an unscorable caption
  if (parsed.valid) {
    const std::string& generated = std::get<std::string>(parsed.payload);
    raw_similarity =
        cosine_similarity(embedder.embed(generated), embedder.embed(reference));
    try {
      judge::JudgeScores scores =
          judge_provider.score(judge::JudgeRequest{generated, reference, sample.task});
      scores.validate();
      raw_judge = scores.mean();
    } catch (const JudgeUnavailableError&) {
      bd.judge_fallback = true;
    }
  }

  const auto& sim_entry = stats.at(sample.dataset_id, sample.task, RewardChannel::kContent);
  const auto& judge_entry = stats.at(sample.dataset_id, sample.task, RewardChannel::kJudge);

  bd.raw_content = raw_similarity;
  bd.normalized_content = norm::normalize(sim_entry, raw_similarity);
  bd.similarity_component = bd.normalized_content;
  if (bd.judge_fallback) {
    bd.judge_component = *bd.similarity_component;
  } else {
    bd.raw_judge_score = raw_judge;
    bd.judge_component = norm::normalize(judge_entry, raw_judge);
  }
  bd.final = 0.5 * *bd.similarity_component + 0.5 * *bd.judge_component;
  return bd;
}

RewardBreakdown dispatch_reward(const TaskSample& sample, const std::string& response_text,
                                const norm::StatsTable& stats, JudgeProvider& judge_provider,
                                EmbeddingProvider& embedder, double penalty) {
  ParsedAnswer parsed = parse_answer(sample.task, response_text);
  switch (sample.task) {
    case TaskKind::kTAG:
    case TaskKind::kSTG:
      return grounding_reward(sample, parsed, stats, penalty);
    case TaskKind::kVS:
    case TaskKind::kRC:
      return caption_reward(sample, parsed, stats, judge_provider, embedder);
  }
  throw ConfigError("dispatch_reward: unknown task kind");
}

}  // namespace medgrpo::rewards
