#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace plotkit {

struct PlotVariant {
  std::string source;  // generator tag, never shown to annotators or the judge
  std::string text;

  bool operator==(const PlotVariant&) const = default;
};

// Two plots generated from the same premise.
struct PreferencePair {
  std::string pair_id;
  std::string premise;
  PlotVariant plot_a;
  PlotVariant plot_b;

  bool operator==(const PreferencePair&) const = default;
};

// JSONL: {pair_id, premise, plot_a{source,text}, plot_b{source,text}}
void to_json(nlohmann::json& j, const PreferencePair& p);
void from_json(const nlohmann::json& j, PreferencePair& p);

std::vector<PreferencePair> read_pairs(std::istream& in);

// Preference questions. Q2 is the free-text explanation of the Q1 answer.
enum class Question { Q1, Q2, Q3, Q4, Q5, Q6 };

inline constexpr Question kChoiceQuestions[] = {Question::Q1, Question::Q3, Question::Q4, Question::Q5,
                                                Question::Q6};

std::string_view to_string(Question q);
std::optional<Question> question_from_string(std::string_view s);
// Verbatim question text; for Q2 the explanation instruction.
std::string_view question_text(Question q);

// Answer to one choice question.
enum class Choice { PLOT_A, PLOT_B, BOTH, NEITHER };

inline constexpr Choice kAllChoices[] = {Choice::PLOT_A, Choice::PLOT_B, Choice::BOTH, Choice::NEITHER};

std::string_view to_string(Choice c);
std::optional<Choice> choice_from_string(std::string_view s);

}  // namespace plotkit
