#pragma once

#include <array>
#include <string>

#include "medgrpo/task.hpp"

namespace medgrpo::judge {

// Integer 1-5 per dimension; mean() is the scalar fed into normalization.
struct JudgeScores {
  int terminology = 1;
  int instrument_anatomy = 1;
  int specificity = 1;
  int procedure_context = 1;
  int action_state = 1;

  double mean() const;
  void validate() const;  // throws ValidationError when any score leaves 1..5
  bool operator==(const JudgeScores&) const = default;
};

struct JudgeRequest {
  std::string generated;
  std::string reference;
  TaskKind task = TaskKind::kVS;
};

// Labels used on the wire, in canonical order.
inline constexpr std::array<const char*, 5> kDimensionLabels = {
    "terminology", "instrument_anatomy", "specificity", "procedure_context", "action_state"};

// One reusable system line; the full rubric travels in the user prompt.
std::string judge_system_prompt();

// User prompt embedding both captions plus the five dimensions with their
// complete 1-5 rubrics. The framing is strictly comparative: the judge is
// asked how closely the generated caption matches the reference, never to
// rate quality in isolation.
std::string build_judge_prompt(const JudgeRequest& request);

// Canonical five-line "label: score" block. parse_judge_response inverts it.
std::string render_judge_scores(const JudgeScores& scores);

// Extracts the five labeled integers from free-form model output. Tolerates
// surrounding prose; throws ScoreParseError when a label is missing, a score
// is out of range, or duplicate labels disagree.
JudgeScores parse_judge_response(const std::string& text);

// Deterministic stand-in for the remote judge. Scores all five dimensions by
// how much of the reference's token set the generated caption covers:
// identical captions earn all 5s, disjoint ones all 1s, and more overlap
// never lowers a score.
JudgeScores mock_judge(const JudgeRequest& request);

}  // namespace medgrpo::judge
