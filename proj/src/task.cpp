#include "medgrpo/task.hpp"

#include "medgrpo/errors.hpp"

namespace medgrpo {

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::kTAG: return "TAG";
    case TaskKind::kSTG: return "STG";
    case TaskKind::kVS: return "VS";
    case TaskKind::kRC: return "RC";
  }
  throw ConfigError("to_string: unknown task kind");
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "TAG") return TaskKind::kTAG;
  if (text == "STG") return TaskKind::kSTG;
  if (text == "VS") return TaskKind::kVS;
  if (text == "RC") return TaskKind::kRC;
  throw ConfigError("parse_task_kind: unknown task kind '" + text +
                    "' (expected TAG, STG, VS, or RC)");
}

std::string to_string(RewardChannel channel) {
  switch (channel) {
    case RewardChannel::kContent: return "content";
    case RewardChannel::kJudge: return "judge";
  }
  throw ConfigError("to_string: unknown reward channel");
}

RewardChannel parse_reward_channel(const std::string& text) {
  if (text == "content") return RewardChannel::kContent;
  if (text == "judge") return RewardChannel::kJudge;
  throw ConfigError("parse_reward_channel: unknown channel '" + text +
                    "' (expected content or judge)");
}

}  // namespace medgrpo
