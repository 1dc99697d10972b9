#pragma once

#include <string>

namespace medgrpo {

// TAG: temporal grounding, answers are second-denominated intervals.
// STG: spatiotemporal grounding, answers are per-frame box tracks.
// VS / RC: free-text captioning (video summary, regional description).
enum class TaskKind { kTAG, kSTG, kVS, kRC };

std::string to_string(TaskKind task);

// Accepts the canonical upper-case names; throws ConfigError otherwise.
TaskKind parse_task_kind(const std::string& text);

// Reward channel a stats entry applies to. Grounding tasks only have a
// content channel; caption tasks fit content (similarity) and judge
// percentiles separately.
enum class RewardChannel { kContent, kJudge };

std::string to_string(RewardChannel channel);
RewardChannel parse_reward_channel(const std::string& text);

}  // namespace medgrpo
