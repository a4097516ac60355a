#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "plotkit/plot.hpp"

// Builders for every generation prompt. All functions are pure; the text is
// frozen by the golden files under tests/golden/.
namespace plotkit::prompts {

struct CharacterContext {
  std::string premise;
  std::string setting;
  std::vector<Character> previous;  // characters 1..k-1, complete
};

struct OutlineContext {
  std::string premise;
  std::string setting;
  std::string characters_block;
  std::vector<std::string> existing_top_points;
  // 0 while generating the top level; 1-based index of the point being
  // expanded otherwise.
  int current_top_index = 0;
  // Sub-points of the top points before the current one (index i holds the
  // children of point i + 1).
  std::vector<std::vector<std::string>> earlier_sub_points;
  std::vector<std::string> existing_sub_points_under_current;
  int top_point_limit = 4;
  int sub_point_limit = 4;
};

std::string premise_prompt();
std::string setting_prompt(std::string_view premise);

// Numbered "k. Full Name: portrait" lines.
std::string characters_block(const std::vector<Character>& characters);

// k is 1-based and must equal ctx.previous.size() + 1.
std::string character_name_prompt(const CharacterContext& ctx, int k);
std::string character_portrait_prompt(const CharacterContext& ctx, int k, std::string_view name);

std::string top_outline_prompt(const OutlineContext& ctx);

// Outline through the current top point, the expansion instruction and the
// next sub-label stem.
std::string sub_outline_prefix(const OutlineContext& ctx);
// Later top points demoted to the letters following the next sub-label.
// Empty when expanding the final top point.
std::string sub_outline_suffix(const OutlineContext& ctx);

// Completion-robot wrapper: instructions, suffix block, then the prompt.
// Both arguments must be non-empty.
std::string completion_wrapper(std::string_view prefix, std::string_view suffix);

// Asks for the scene and involved characters of one outline item.
std::string scene_annotation_prompt(const OutlineContext& ctx, std::string_view item_text);

// Letter for a 0-based sub-point index ('a' + i). Throws past 'z'.
char sub_letter(std::size_t index);

// Names accepted by dump(): premise, setting, character_name,
// character_portrait, top_outline, sub_outline_prefix, sub_outline_suffix,
// completion_wrapper, scene_annotation, judge.
std::vector<std::string> template_names();
// Renders a template on the built-in fixture inputs used by the golden files.
std::string dump(std::string_view name);

}  // namespace plotkit::prompts
