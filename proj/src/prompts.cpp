#include "plotkit/prompts.hpp"

#include "plotkit/errors.hpp"
#include "plotkit/judge.hpp"

namespace plotkit::prompts {
namespace {

std::string story_header(std::string_view premise, std::string_view setting) {
  std::string out = "Premise: ";
  out += premise;
  out += "\n\nSetting: ";
  out += setting;
  out += "\n\n";
  return out;
}

std::string character_entries(const std::vector<Character>& previous) {
  std::string out;
  for (std::size_t i = 0; i < previous.size(); ++i) {
    out += std::to_string(i + 1) + ".\n\nFull Name: " + previous[i].full_name +
           "\n\nCharacter Portrait: " + previous[i].portrait + "\n\n";
  }
  return out;
}

void check_k(const CharacterContext& ctx, int k) {
  if (k < 1 || static_cast<std::size_t>(k) != ctx.previous.size() + 1) {
    throw PreconditionError("character prompt: k must equal the number of previous characters + 1");
  }
}

std::string outline_header(const OutlineContext& ctx) {
  return story_header(ctx.premise, ctx.setting) + "Characters: " + ctx.characters_block + "\n\n";
}

void check_expanding(const OutlineContext& ctx) {
  if (ctx.current_top_index < 1 ||
      static_cast<std::size_t>(ctx.current_top_index) > ctx.existing_top_points.size()) {
    throw PreconditionError("sub-outline prompt: current_top_index out of range");
  }
}

const std::string kWrapperHeader =
    "Imagine you are a text completion robot. Give the output of the following task with the "
    "given suffix and prompt. Please follow the instructions below.\n\n"
    "Instructions: Your output should not contain the content of the suffix. Only use the suffix "
    "as complementary information. The output should mainly be based on the prompt. Now the "
    "suffix begins.\n\n"
    "Suffix:\n\n";

OutlineContext sample_outline(int current, std::vector<std::string> subs_under_current) {
  OutlineContext ctx;
  ctx.premise =
      "Alex dreams of becoming a famous writer but becomes trapped in a time warp, reliving the "
      "same day over and over.";
  ctx.setting =
      "The story is set in a world where magic is real and has been suppressed by a powerful and "
      "corrupt government.";
  ctx.characters_block = characters_block({
      {"Alex Carter", "Alex Carter is an aspiring novelist who works nights at a bookstore."},
      {"Jack Thomas", "Jack Thomas is Alex's roommate and a government clerk who hides a secret."},
  });
  ctx.existing_top_points = {
      "Alex wakes up to find the same morning repeating and realizes that time is looping.",
      "Alex learns that the loop is tied to a forbidden spell hidden in an old manuscript.",
      "Jack reveals he works for the agency that suppresses magic and offers to help.",
      "Alex breaks the loop by finishing the manuscript and publishing the truth.",
  };
  ctx.current_top_index = current;
  if (current >= 2) {
    ctx.earlier_sub_points.push_back({
        "Alex notices the same news broadcast playing every morning.",
        "Alex tests the loop by changing small details of the day.",
        "Alex confides in Jack, who dismisses the story as a dream.",
    });
  }
  ctx.existing_sub_points_under_current = std::move(subs_under_current);
  return ctx;
}

}  // namespace

char sub_letter(std::size_t index) {
  if (index >= 26) throw PreconditionError("sub-point index past 'z'");
  return static_cast<char>('a' + index);
}

std::string premise_prompt() {
  return "Write a premise for a short story in one paragraph with two to three sentences.\n\nPremise:";
}

std::string setting_prompt(std::string_view premise) {
  return "Premise: " + std::string(premise) +
         "\n\nDescribe the setting of the story.\n\nThe story is set in";
}

std::string characters_block(const std::vector<Character>& characters) {
  std::string out;
  for (std::size_t i = 0; i < characters.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + characters[i].full_name + ": " + characters[i].portrait;
  }
  return out;
}

std::string character_name_prompt(const CharacterContext& ctx, int k) {
  check_k(ctx, k);
  return story_header(ctx.premise, ctx.setting) +
         "List the names and details of all major characters.\n\n" + character_entries(ctx.previous) +
         std::to_string(k) + ".\n\nFull Name:";
}

std::string character_portrait_prompt(const CharacterContext& ctx, int k, std::string_view name) {
  check_k(ctx, k);
  const std::string n(name);
  return story_header(ctx.premise, ctx.setting) +
         "List the names and details of all major characters.\n\n" + character_entries(ctx.previous) +
         std::to_string(k) + ".\n\nFull Name: " + n +
         "\n\nUse ONLY one short sentence for the following description relevant to the story, "
         "focusing on relationship between characters, occupation and experience instead of "
         "appearance. Only ONE sentence is allowed!\n\nCharacter Portrait: " +
         n + " is";
}

std::string top_outline_prompt(const OutlineContext& ctx) {
  if (ctx.current_top_index != 0) {
    throw PreconditionError("top-outline prompt: current_top_index must be 0");
  }
  const std::string limit = std::to_string(ctx.top_point_limit);
  std::string out = outline_header(ctx) +
                    "Outline the main plot points of the story using no more than " + limit +
                    " points, generating one point at a time. IMPORTANT: Please make sure that the "
                    "story has a clear end at or before Point " +
                    limit + ".\n\n";
  for (std::size_t i = 0; i < ctx.existing_top_points.size(); ++i) {
    out += std::to_string(i + 1) + ". " + ctx.existing_top_points[i] + "\n";
  }
  out += std::to_string(ctx.existing_top_points.size() + 1) + ".";
  return out;
}

std::string sub_outline_prefix(const OutlineContext& ctx) {
  check_expanding(ctx);
  const auto current = static_cast<std::size_t>(ctx.current_top_index);
  std::string out = outline_header(ctx) + "Outline:\n\n";
  for (std::size_t i = 0; i < current; ++i) {
    out += std::to_string(i + 1) + ". " + ctx.existing_top_points[i] + "\n";
    if (i + 1 < current && i < ctx.earlier_sub_points.size()) {
      const auto& subs = ctx.earlier_sub_points[i];
      for (std::size_t s = 0; s < subs.size(); ++s) {
        out += '\t';
        out += sub_letter(s);
        out += ". " + subs[s] + "\n";
      }
    }
  }
  const auto& done = ctx.existing_sub_points_under_current;
  out += "\n\tList the main events that occur under this heading using no more than " +
         std::to_string(ctx.sub_point_limit) + " points, ";
  if (done.empty()) out += "starting from the beginning, ";
  out += "generating one or two points without repeating the content of the suffix and stop.\n\n";
  for (std::size_t s = 0; s < done.size(); ++s) {
    out += '\t';
    out += sub_letter(s);
    out += ". " + done[s] + "\n";
  }
  out += '\t';
  out += sub_letter(done.size());
  out += '.';
  return out;
}

std::string sub_outline_suffix(const OutlineContext& ctx) {
  check_expanding(ctx);
  const auto current = static_cast<std::size_t>(ctx.current_top_index);
  std::string out;
  std::size_t letter = ctx.existing_sub_points_under_current.size() + 1;
  for (std::size_t i = current; i < ctx.existing_top_points.size(); ++i, ++letter) {
    if (!out.empty()) out += '\n';
    out += '\t';
    out += sub_letter(letter);
    out += ". " + ctx.existing_top_points[i];
  }
  return out;
}

std::string completion_wrapper(std::string_view prefix, std::string_view suffix) {
  if (prefix.empty() || suffix.empty()) {
    throw PreconditionError("completion wrapper: prefix and suffix must be non-empty");
  }
  std::string out = kWrapperHeader;
  out += suffix;
  out += "\n\nEnd of Suffix\n\nNow the prompt begins.\n\nPrompt:\n\n";
  out += prefix;
  return out;
}

std::string scene_annotation_prompt(const OutlineContext& ctx, std::string_view item_text) {
  return outline_header(ctx) + "Outline point: " + std::string(item_text) +
         "\n\nName the scene where this outline point takes place and the major characters "
         "involved in it. Answer in one line using exactly this format:\n"
         "Scene: <place> Characters: <full names separated by commas>";
}

std::vector<std::string> template_names() {
  return {"premise",          "setting",           "character_name",
          "character_portrait", "top_outline",     "sub_outline_prefix",
          "sub_outline_suffix", "completion_wrapper", "scene_annotation",
          "judge"};
}

std::string dump(std::string_view name) {
  const OutlineContext first = sample_outline(1, {});
  CharacterContext cc{first.premise, first.setting, {}};
  if (name == "premise") return premise_prompt();
  if (name == "setting") return setting_prompt(first.premise);
  if (name == "character_name") return character_name_prompt(cc, 1);
  if (name == "character_portrait") return character_portrait_prompt(cc, 1, "Jack Thomas");
  if (name == "top_outline") {
    OutlineContext top = first;
    top.current_top_index = 0;
    top.existing_top_points.resize(2);
    return top_outline_prompt(top);
  }
  if (name == "sub_outline_prefix") return sub_outline_prefix(first);
  if (name == "sub_outline_suffix") return sub_outline_suffix(first);
  if (name == "completion_wrapper") {
    return completion_wrapper(sub_outline_prefix(first), sub_outline_suffix(first));
  }
  if (name == "scene_annotation") {
    return scene_annotation_prompt(first, first.existing_top_points.front());
  }
  if (name == "judge") {
    return build_judge_prompt("Premise: A\n\nSettings: B", "Premise: A\n\nSettings: C",
                              Aspect::OVERALL);
  }
  throw PreconditionError("unknown template '" + std::string(name) + "'");
}

}  // namespace plotkit::prompts
