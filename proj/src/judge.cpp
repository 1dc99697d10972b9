#include "medgrpo/judge.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include "medgrpo/errors.hpp"

namespace medgrpo::judge {

double JudgeScores::mean() const {
  return (terminology + instrument_anatomy + specificity + procedure_context + action_state) / 5.0;
}

void JudgeScores::validate() const {
  for (int s : {terminology, instrument_anatomy, specificity, procedure_context, action_state}) {
    if (s < 1 || s > 5) {
      throw ValidationError("JudgeScores: every dimension score must lie in 1..5");
    }
  }
}

std::string judge_system_prompt() {
  return "You are an expert surgical educator evaluating descriptions of medical and "
         "surgical video. You compare a generated caption against a reference caption "
         "and score how closely they match.";
}

std::string build_judge_prompt(const JudgeRequest& request) {
  std::ostringstream out;
  out << "How closely does the generated caption match the reference? Do not rate the "
         "generated caption's quality in isolation; score only its agreement with the "
         "reference, dimension by dimension.\n"
         "\n"
         "Reference caption:\n"
      << request.reference
      << "\n"
         "\n"
         "Generated caption:\n"
      << request.generated
      << "\n"
         "\n"
         "Score each dimension from 1 to 5, where 5 is a very close match (minor phrasing "
         "differences), 4 a good match (minor omissions), 3 a partial match (notable "
         "omissions), 2 significant differences (missing important information), and 1 very "
         "different (major errors or missing content).\n"
         "\n"
         "1. Medical Terminology Precision (terminology): does the generated caption use the "
         "same medical terms as the reference?\n"
         "   - Score 5: medical terms match reference precisely (instruments, anatomy, actions)\n"
         "   - Score 4: most terms match reference, minor substitutions acceptable\n"
         "   - Score 3: some terms match reference, some generic or imprecise\n"
         "   - Score 2: many terms don't match reference, often generic\n"
         "   - Score 1: terms mostly don't match reference or are incorrect\n"
         "\n"
         "2. Instrument and Anatomy Identification (instrument_anatomy): are the instruments "
         "and anatomical structures identified the same as in the reference?\n"
         "   - Score 5: all instruments and anatomy match reference identifications\n"
         "   - Score 4: most instruments and anatomy match reference\n"
         "   - Score 3: some instruments and anatomy match reference, some missing\n"
         "   - Score 2: many instruments and anatomy don't match reference\n"
         "   - Score 1: instruments and anatomy mostly wrong or missing vs reference\n"
         "\n"
         "3. Specificity vs Vagueness (specificity): is the level of specificity/vagueness "
         "similar to the reference?\n"
         "   - Score 5: specificity level matches reference (specific when reference is "
         "specific)\n"
         "   - Score 4: specificity level mostly matches reference\n"
         "   - Score 3: specificity level sometimes differs from reference\n"
         "   - Score 2: specificity level often differs from reference (too vague or too "
         "specific)\n"
         "   - Score 1: specificity level doesn't match reference at all\n"
         "\n"
         "4. Clinical Procedure Context (procedure_context): does the generated caption convey "
         "the same procedural understanding as the reference?\n"
         "   - Score 5: procedural context matches reference (workflow, steps, purpose)\n"
         "   - Score 4: most procedural context matches reference\n"
         "   - Score 3: some procedural context matches reference, some missing\n"
         "   - Score 2: procedural context differs significantly from reference\n"
         "   - Score 1: procedural context mostly missing or wrong vs reference\n"
         "\n"
         "5. Action and State Accuracy (action_state): are the actions and states described "
         "the same as in the reference?\n"
         "   - Score 5: all actions and states match reference (active/idle, "
         "grasping/releasing, etc.)\n"
         "   - Score 4: most actions and states match reference\n"
         "   - Score 3: some actions and states match reference, some differ\n"
         "   - Score 2: many actions and states differ from reference\n"
         "   - Score 1: actions and states mostly wrong vs reference\n"
         "\n"
         "Answer with exactly five lines, one integer score per dimension:\n"
         "terminology: <1-5>\n"
         "instrument_anatomy: <1-5>\n"
         "specificity: <1-5>\n"
         "procedure_context: <1-5>\n"
         "action_state: <1-5>\n";
  return out.str();
}

std::string render_judge_scores(const JudgeScores& scores) {
  scores.validate();
  std::ostringstream out;
  out << "terminology: " << scores.terminology << "\n"
      << "instrument_anatomy: " << scores.instrument_anatomy << "\n"
      << "specificity: " << scores.specificity << "\n"
      << "procedure_context: " << scores.procedure_context << "\n"
      << "action_state: " << scores.action_state << "\n";
  return out.str();
}

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

// All integers following "label:" or "label =", label matched on word
// boundaries, case-insensitive.
std::vector<int> find_labeled_scores(const std::string& text, const std::string& label) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::vector<int> found;
  std::size_t pos = 0;
  while ((pos = lower.find(label, pos)) != std::string::npos) {
    std::size_t end = pos + label.size();
    bool left_ok = pos == 0 || !is_word_char(lower[pos - 1]);
    bool right_ok = end >= lower.size() || !is_word_char(lower[end]);
    pos = end;
    if (!left_ok || !right_ok) continue;
    std::size_t i = end;
    while (i < lower.size() && (lower[i] == ' ' || lower[i] == '\t')) ++i;
    if (i >= lower.size() || (lower[i] != ':' && lower[i] != '=')) continue;
    ++i;
    while (i < lower.size() && (lower[i] == ' ' || lower[i] == '\t')) ++i;
    if (i >= lower.size() || std::isdigit(static_cast<unsigned char>(lower[i])) == 0) continue;
    std::size_t digits_end = i;
    while (digits_end < lower.size() &&
           std::isdigit(static_cast<unsigned char>(lower[digits_end])) != 0) {
      ++digits_end;
    }
    found.push_back(std::stoi(lower.substr(i, digits_end - i)));
  }
  return found;
}

int extract_score(const std::string& text, const std::string& label) {
  std::vector<int> found = find_labeled_scores(text, label);
  if (found.empty()) {
    throw ScoreParseError("parse_judge_response: no score found for '" + label + "'");
  }
  std::set<int> distinct(found.begin(), found.end());
  if (distinct.size() > 1) {
    throw ScoreParseError("parse_judge_response: conflicting scores for '" + label + "'");
  }
  int score = found.front();
  if (score < 1 || score > 5) {
    throw ScoreParseError("parse_judge_response: score for '" + label + "' is " +
                          std::to_string(score) + ", outside 1..5");
  }
  return score;
}

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace

JudgeScores parse_judge_response(const std::string& text) {
  JudgeScores scores;
  scores.terminology = extract_score(text, "terminology");
  scores.instrument_anatomy = extract_score(text, "instrument_anatomy");
  scores.specificity = extract_score(text, "specificity");
  scores.procedure_context = extract_score(text, "procedure_context");
  scores.action_state = extract_score(text, "action_state");
  return scores;
}

JudgeScores mock_judge(const JudgeRequest& request) {
  auto gen_tokens = tokenize_lower(request.generated);
  auto ref_tokens = tokenize_lower(request.reference);
  std::set<std::string> gen_set(gen_tokens.begin(), gen_tokens.end());
  std::set<std::string> ref_set(ref_tokens.begin(), ref_tokens.end());

  double recall;
  if (ref_set.empty()) {
    recall = gen_set.empty() ? 1.0 : 0.0;
  } else {
    std::size_t covered = 0;
    for (const auto& token : ref_set) covered += gen_set.count(token);
    recall = static_cast<double>(covered) / static_cast<double>(ref_set.size());
  }

  int score;
  if (recall >= 0.875) {
    score = 5;
  } else if (recall >= 0.625) {
    score = 4;
  } else if (recall >= 0.375) {
    score = 3;
  } else if (recall >= 0.125) {
    score = 2;
  } else {
    score = 1;
  }
  return JudgeScores{score, score, score, score, score};
}

}  // namespace medgrpo::judge
