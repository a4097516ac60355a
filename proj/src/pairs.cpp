#include "plotkit/pairs.hpp"

#include <istream>

#include "plotkit/errors.hpp"
#include "plotkit/text.hpp"

namespace plotkit {

void to_json(nlohmann::json& j, const PreferencePair& p) {
  j = nlohmann::json{{"pair_id", p.pair_id},
                     {"premise", p.premise},
                     {"plot_a", {{"source", p.plot_a.source}, {"text", p.plot_a.text}}},
                     {"plot_b", {{"source", p.plot_b.source}, {"text", p.plot_b.text}}}};
}

void from_json(const nlohmann::json& j, PreferencePair& p) {
  j.at("pair_id").get_to(p.pair_id);
  j.at("premise").get_to(p.premise);
  j.at("plot_a").at("source").get_to(p.plot_a.source);
  j.at("plot_a").at("text").get_to(p.plot_a.text);
  j.at("plot_b").at("source").get_to(p.plot_b.source);
  j.at("plot_b").at("text").get_to(p.plot_b.text);
}

std::vector<PreferencePair> read_pairs(std::istream& in) {
  std::vector<PreferencePair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<PreferencePair>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("pairs line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string_view to_string(Question q) {
  switch (q) {
    case Question::Q1: return "Q1";
    case Question::Q2: return "Q2";
    case Question::Q3: return "Q3";
    case Question::Q4: return "Q4";
    case Question::Q5: return "Q5";
    case Question::Q6: return "Q6";
  }
  return "Q1";
}

std::optional<Question> question_from_string(std::string_view s) {
  for (Question q : {Question::Q1, Question::Q2, Question::Q3, Question::Q4, Question::Q5, Question::Q6}) {
    if (to_string(q) == s) return q;
  }
  return std::nullopt;
}

std::string_view question_text(Question q) {
  switch (q) {
    case Question::Q1: return "Which story plot is more interesting to you overall?";
    case Question::Q2: return "Please explain your answer to Q1 in at least 25 words.";
    case Question::Q3:
      return "In your opinion, which one of the plots above could generate a more interesting book or "
             "movie (when a full story is written based on it)?";
    case Question::Q4: return "Which story plot created more suspense and surprise?";
    case Question::Q5: return "Which story’s characters or events do you identify with or care for more?";
    case Question::Q6: return "Which story has a better ending?";
  }
  return {};
}

std::string_view to_string(Choice c) {
  switch (c) {
    case Choice::PLOT_A: return "PLOT_A";
    case Choice::PLOT_B: return "PLOT_B";
    case Choice::BOTH: return "BOTH";
    case Choice::NEITHER: return "NEITHER";
  }
  return "NEITHER";
}

std::optional<Choice> choice_from_string(std::string_view s) {
  for (Choice c : kAllChoices) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

}  // namespace plotkit
