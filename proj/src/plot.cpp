#include "plotkit/plot.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "plotkit/errors.hpp"
#include "plotkit/text.hpp"

namespace plotkit {
namespace {

constexpr std::string_view kPremise = "Premise:";
constexpr std::string_view kSettings = "Settings:";
constexpr std::string_view kSetting = "Setting:";
constexpr std::string_view kCharacters = "Characters:";
constexpr std::string_view kOutline = "Outline:";
constexpr std::string_view kSceneTag = "Scene:";
constexpr std::string_view kCharactersTag = "Characters:";
constexpr std::string_view kSubIndent = "    ";

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

bool is_header(std::string_view line) {
  return line.starts_with(kPremise) || line.starts_with(kSettings) ||
         line.starts_with(kSetting) || line.starts_with(kCharacters) ||
         line.starts_with(kOutline);
}

// Last occurrence of `tag` that starts the string or follows whitespace.
std::size_t find_tag(std::string_view s, std::string_view tag) {
  std::size_t pos = s.rfind(tag);
  while (pos != std::string_view::npos) {
    if (pos == 0 || std::isspace(static_cast<unsigned char>(s[pos - 1]))) return pos;
    if (pos == 0) break;
    pos = s.rfind(tag, pos - 1);
  }
  return std::string_view::npos;
}

class LineCursor {
 public:
  explicit LineCursor(std::string_view raw) : lines_(text::split_lines(raw)) {}

  bool done() const { return pos_ >= lines_.size(); }
  // 1-based line number of the current line (or one past the end).
  std::size_t line_no() const { return pos_ + 1; }
  std::string current() const { return text::trim(lines_[pos_]); }
  void advance() { ++pos_; }

  void skip_blank() {
    while (!done() && current().empty()) advance();
  }

  // Reads the text of a paragraph section whose header has just been matched.
  std::string read_paragraph(std::string_view first) {
    std::vector<std::string> parts;
    std::string head = text::trim(first);
    if (!head.empty()) parts.push_back(head);
    advance();
    while (!done()) {
      std::string line = current();
      if (line.empty() || is_header(line)) break;
      parts.push_back(line);
      advance();
    }
    return text::join(parts, "\n");
  }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

struct ParsedLabel {
  std::string number;  // empty for letter-only labels ("a.")
  char letter = 0;     // 0 for top labels
  std::string rest;
};

std::optional<ParsedLabel> parse_label(std::string_view line) {
  ParsedLabel out;
  std::size_t i = 0;
  while (i < line.size() && is_digit(line[i])) ++i;
  out.number = std::string(line.substr(0, i));
  if (i < line.size() && is_lower(line[i])) {
    out.letter = line[i];
    ++i;
  }
  if (out.number.empty() && out.letter == 0) return std::nullopt;
  if (i >= line.size() || line[i] != '.') return std::nullopt;
  ++i;
  if (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) return std::nullopt;
  out.rest = std::string(line.substr(i));
  return out;
}

OutlineSection make_item(std::string label, std::string_view rest) {
  ItemAnnotations ann = split_annotations(rest);
  OutlineSection item;
  item.label = std::move(label);
  item.text = std::move(ann.text);
  item.scene = std::move(ann.scene);
  item.mentioned_characters = std::move(ann.characters);
  return item;
}

void render_item(std::string& out, const OutlineSection& item, bool indent) {
  if (indent) out += kSubIndent;
  out += item.label;
  out += '.';
  if (!item.text.empty()) {
    out += ' ';
    out += item.text;
  }
  if (item.scene) {
    out += " Scene: ";
    out += *item.scene;
    out += '.';
  }
  if (!item.mentioned_characters.empty()) {
    out += " Characters: ";
    out += text::join(item.mentioned_characters, ", ");
  }
  out += '\n';
}

std::string top_number(std::string_view sub_label) {
  std::size_t i = 0;
  while (i < sub_label.size() && is_digit(sub_label[i])) ++i;
  return std::string(sub_label.substr(0, i));
}

void add(ValidationReport& r, ViolationCode code, std::string location, std::string message) {
  r.violations.push_back({code, std::move(location), std::move(message)});
}

}  // namespace

std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::CHAR_COUNT: return "CHAR_COUNT";
    case ViolationCode::TOP_COUNT: return "TOP_COUNT";
    case ViolationCode::MISSING_TOP: return "MISSING_TOP";
    case ViolationCode::SUB_COUNT: return "SUB_COUNT";
    case ViolationCode::LABEL_GAP: return "LABEL_GAP";
    case ViolationCode::EMPTY_TEXT: return "EMPTY_TEXT";
    case ViolationCode::DUPLICATE_NAME: return "DUPLICATE_NAME";
    case ViolationCode::NESTING: return "NESTING";
  }
  return "UNKNOWN";
}

std::optional<ViolationCode> violation_code_from_string(std::string_view s) {
  for (auto c : {ViolationCode::CHAR_COUNT, ViolationCode::TOP_COUNT, ViolationCode::MISSING_TOP,
                 ViolationCode::SUB_COUNT, ViolationCode::LABEL_GAP, ViolationCode::EMPTY_TEXT,
                 ViolationCode::DUPLICATE_NAME, ViolationCode::NESTING}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

bool ValidationReport::has(ViolationCode code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [code](const Violation& v) { return v.code == code; });
}

bool is_top_label(std::string_view label) {
  return !label.empty() && std::all_of(label.begin(), label.end(), is_digit);
}

bool is_sub_label(std::string_view label) {
  return label.size() >= 2 && is_lower(label.back()) &&
         is_top_label(label.substr(0, label.size() - 1));
}

ItemAnnotations split_annotations(std::string_view item_text) {
  ItemAnnotations out;
  std::string t = text::trim(item_text);

  std::size_t cpos = find_tag(t, kCharactersTag);
  if (cpos != std::string::npos) {
    std::string list = t.substr(cpos + kCharactersTag.size());
    std::size_t start = 0;
    while (start <= list.size()) {
      std::size_t comma = list.find(',', start);
      std::string name = text::trim(std::string_view(list).substr(
          start, comma == std::string::npos ? std::string::npos : comma - start));
      if (!name.empty()) out.characters.push_back(std::move(name));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    t = text::trim(std::string_view(t).substr(0, cpos));
  }

  std::size_t spos = find_tag(t, kSceneTag);
  if (spos != std::string::npos) {
    std::string scene = text::trim(std::string_view(t).substr(spos + kSceneTag.size()));
    if (!scene.empty() && scene.back() == '.') scene.pop_back();
    scene = text::trim(scene);
    if (!scene.empty()) out.scene = std::move(scene);
    t = text::trim(std::string_view(t).substr(0, spos));
  }

  out.text = std::move(t);
  return out;
}

PlotDocument parse_plot(std::string_view raw) {
  PlotDocument doc;
  LineCursor cur(raw);

  cur.skip_blank();
  if (!cur.done() && cur.current().starts_with(kPremise)) {
    std::string line = cur.current();
    doc.premise = cur.read_paragraph(std::string_view(line).substr(kPremise.size()));
  }

  cur.skip_blank();
  if (cur.done()) throw ParseError(cur.line_no(), std::string(kSettings), "end of input");
  {
    std::string line = cur.current();
    std::size_t skip = 0;
    if (line.starts_with(kSettings)) {
      skip = kSettings.size();
    } else if (line.starts_with(kSetting)) {
      skip = kSetting.size();
    } else {
      throw ParseError(cur.line_no(), std::string(kSettings), "found '" + line.substr(0, 40) + "'");
    }
    doc.setting = cur.read_paragraph(std::string_view(line).substr(skip));
  }

  cur.skip_blank();
  if (cur.done()) throw ParseError(cur.line_no(), std::string(kCharacters), "end of input");
  {
    std::string line = cur.current();
    if (!line.starts_with(kCharacters)) {
      throw ParseError(cur.line_no(), std::string(kCharacters), "found '" + line.substr(0, 40) + "'");
    }
    if (!text::trim(std::string_view(line).substr(kCharacters.size())).empty()) {
      throw ParseError(cur.line_no(), "line break after Characters:");
    }
    cur.advance();
  }

  while (true) {
    cur.skip_blank();
    if (cur.done()) throw ParseError(cur.line_no(), std::string(kOutline), "end of input");
    std::string line = cur.current();
    if (line.starts_with(kOutline)) break;
    if (is_header(line)) {
      throw ParseError(cur.line_no(), std::string(kOutline), "found '" + line.substr(0, 40) + "'");
    }
    std::size_t colon = line.find(':');
    if (colon == std::string::npos) {
      throw ParseError(cur.line_no(), "character entry 'Full Name: portrait'");
    }
    Character c{text::trim(std::string_view(line).substr(0, colon)),
                text::trim(std::string_view(line).substr(colon + 1))};
    if (c.full_name.empty()) throw ParseError(cur.line_no(), "character full name");
    doc.characters.push_back(std::move(c));
    cur.advance();
  }

  {
    std::string line = cur.current();
    if (!text::trim(std::string_view(line).substr(kOutline.size())).empty()) {
      throw ParseError(cur.line_no(), "line break after Outline:");
    }
    cur.advance();
  }

  // Index into doc.outline of the last numeric top item, if any.
  std::optional<std::size_t> current_top;
  while (true) {
    cur.skip_blank();
    if (cur.done()) break;
    std::string line = cur.current();
    auto label = parse_label(line);
    if (!label) throw ParseError(cur.line_no(), "outline item label ('1.', '1a.' or 'a.')");

    if (label->letter == 0) {
      doc.outline.push_back(make_item(label->number, label->rest));
      current_top = doc.outline.size() - 1;
    } else {
      std::string parent = label->number;
      if (parent.empty()) parent = current_top ? doc.outline[*current_top].label : "1";
      OutlineSection item = make_item(parent + label->letter, label->rest);
      if (current_top && doc.outline[*current_top].label == parent) {
        doc.outline[*current_top].children.push_back(std::move(item));
      } else {
        doc.outline.push_back(std::move(item));
      }
    }
    cur.advance();
  }

  return doc;
}

std::string render_plot(const PlotDocument& doc) {
  std::string out;
  out += "Premise: ";
  out += doc.premise;
  out += "\n\nSettings: ";
  out += doc.setting;
  out += "\n\nCharacters:\n";
  for (const auto& c : doc.characters) {
    out += c.full_name;
    out += ": ";
    out += c.portrait;
    out += '\n';
  }
  out += "\nOutline:\n";
  for (const auto& item : doc.outline) {
    render_item(out, item, !is_top_label(item.label));
    for (const auto& child : item.children) render_item(out, child, true);
  }
  return out;
}

ValidationReport validate_structure(const PlotDocument& doc, const PipelineConfig& cfg) {
  ValidationReport r;

  if (text::trim(doc.premise).empty()) add(r, ViolationCode::EMPTY_TEXT, "premise", "premise is blank");
  if (text::trim(doc.setting).empty()) add(r, ViolationCode::EMPTY_TEXT, "setting", "setting is blank");

  const int n_chars = static_cast<int>(doc.characters.size());
  if (!cfg.char_range.contains(n_chars)) {
    add(r, ViolationCode::CHAR_COUNT, "characters",
        std::to_string(n_chars) + " characters, expected " + std::to_string(cfg.char_range.min) +
            "-" + std::to_string(cfg.char_range.max));
  }
  std::set<std::string> names;
  for (const auto& c : doc.characters) {
    if (text::trim(c.full_name).empty() || text::trim(c.portrait).empty()) {
      add(r, ViolationCode::EMPTY_TEXT, "character:" + c.full_name, "blank name or portrait");
    }
    if (!names.insert(c.full_name).second) {
      add(r, ViolationCode::DUPLICATE_NAME, "character:" + c.full_name, "duplicate full name");
    }
  }

  std::set<std::string> top_numbers;
  int n_top = 0;
  for (const auto& item : doc.outline) {
    if (is_top_label(item.label)) {
      top_numbers.insert(item.label);
      ++n_top;
    }
  }
  if (n_top < 1 || n_top > cfg.max_top_points) {
    add(r, ViolationCode::TOP_COUNT, "outline",
        std::to_string(n_top) + " top-level points, expected 1-" + std::to_string(cfg.max_top_points));
  }

  // Orphaned sub-level items stand in for their referenced top number when
  // checking top-level contiguity, so a missing point is reported once.
  std::vector<std::string> effective;
  std::set<std::string> reported_missing;
  for (const auto& item : doc.outline) {
    if (is_top_label(item.label)) {
      effective.push_back(item.label);
      continue;
    }
    if (!is_sub_label(item.label)) {
      add(r, ViolationCode::LABEL_GAP, "outline/" + item.label, "malformed label");
      continue;
    }
    std::string number = top_number(item.label);
    if (effective.empty() || effective.back() != number) effective.push_back(number);
    if (!top_numbers.count(number)) {
      if (reported_missing.insert(number).second) {
        add(r, ViolationCode::MISSING_TOP, "outline/" + item.label,
            "sub-level point " + item.label + " has no top-level point " + number);
      }
    } else {
      add(r, ViolationCode::LABEL_GAP, "outline/" + item.label,
          "sub-level point " + item.label + " is not under its top-level point");
    }
  }
  for (std::size_t i = 0; i < effective.size(); ++i) {
    if (effective[i] != std::to_string(i + 1)) {
      add(r, ViolationCode::LABEL_GAP, "outline",
          "top-level labels are not contiguous from 1 (position " + std::to_string(i + 1) +
              " is '" + effective[i] + "')");
      break;
    }
  }

  for (const auto& item : doc.outline) {
    if (text::trim(item.text).empty()) {
      add(r, ViolationCode::EMPTY_TEXT, "outline/" + item.label, "blank item text");
    }
    if (!is_top_label(item.label)) {
      if (!item.children.empty()) {
        add(r, ViolationCode::NESTING, "outline/" + item.label, "sub-level item has children");
      }
      continue;
    }
    const int n_sub = static_cast<int>(item.children.size());
    if (!cfg.sub_range.contains(n_sub)) {
      add(r, ViolationCode::SUB_COUNT, "outline/" + item.label,
          std::to_string(n_sub) + " sub-points, expected " + std::to_string(cfg.sub_range.min) +
              "-" + std::to_string(cfg.sub_range.max));
    }
    for (std::size_t i = 0; i < item.children.size(); ++i) {
      const auto& child = item.children[i];
      std::string expected = item.label + static_cast<char>('a' + std::min<std::size_t>(i, 25));
      if (child.label != expected) {
        add(r, ViolationCode::LABEL_GAP, "outline/" + child.label,
            "expected label " + expected);
      }
      if (text::trim(child.text).empty()) {
        add(r, ViolationCode::EMPTY_TEXT, "outline/" + child.label, "blank item text");
      }
      if (!child.children.empty()) {
        add(r, ViolationCode::NESTING, "outline/" + child.label, "sub-level item has children");
      }
    }
  }

  r.valid = r.violations.empty();
  return r;
}

SftPair split_sft(const PlotDocument& doc) {
  std::string full = render_plot(doc);
  std::string header = "Premise: " + doc.premise + "\n\n";
  return {doc.premise, full.substr(header.size())};
}

std::string sft_reconstruct(const SftPair& pair) {
  return "Premise: " + pair.prompt + "\n\n" + pair.response;
}

void to_json(nlohmann::json& j, const Character& c) {
  j = nlohmann::json{{"full_name", c.full_name}, {"portrait", c.portrait}};
}

void from_json(const nlohmann::json& j, Character& c) {
  j.at("full_name").get_to(c.full_name);
  j.at("portrait").get_to(c.portrait);
}

void to_json(nlohmann::json& j, const OutlineSection& s) {
  j = nlohmann::json{{"label", s.label},
                     {"text", s.text},
                     {"scene", s.scene ? nlohmann::json(*s.scene) : nlohmann::json(nullptr)},
                     {"mentioned_characters", s.mentioned_characters},
                     {"children", s.children}};
}

void from_json(const nlohmann::json& j, OutlineSection& s) {
  j.at("label").get_to(s.label);
  j.at("text").get_to(s.text);
  s.scene.reset();
  if (j.contains("scene") && j["scene"].is_string()) s.scene = j["scene"].get<std::string>();
  s.mentioned_characters = j.value("mentioned_characters", std::vector<std::string>{});
  s.children = j.value("children", std::vector<OutlineSection>{});
}

void to_json(nlohmann::json& j, const PlotDocument& d) {
  j = nlohmann::json{{"premise", d.premise},
                     {"setting", d.setting},
                     {"characters", d.characters},
                     {"outline", d.outline}};
}

void from_json(const nlohmann::json& j, PlotDocument& d) {
  j.at("premise").get_to(d.premise);
  j.at("setting").get_to(d.setting);
  j.at("characters").get_to(d.characters);
  j.at("outline").get_to(d.outline);
}

void to_json(nlohmann::json& j, const Violation& v) {
  j = nlohmann::json{{"code", to_string(v.code)}, {"location", v.location}, {"message", v.message}};
}

void from_json(const nlohmann::json& j, Violation& v) {
  auto code = violation_code_from_string(j.at("code").get<std::string>());
  if (!code) throw FormatError("unknown violation code");
  v.code = *code;
  v.location = j.value("location", std::string{});
  v.message = j.value("message", std::string{});
}

void PipelineConfig::check() const {
  if (char_range.empty() || sub_range.empty() || char_range.min < 0 || sub_range.min < 0) {
    throw PreconditionError("pipeline config: ranges must be non-empty");
  }
  if (max_top_points < 1) throw PreconditionError("pipeline config: max_top_points must be >= 1");
  if (candidates_per_step < 1) throw PreconditionError("pipeline config: candidates_per_step must be >= 1");
  if (max_step_retries < 0) throw PreconditionError("pipeline config: max_step_retries must be >= 0");
  if (sub_range.max > 25) throw PreconditionError("pipeline config: at most 25 sub-points per top point");
}

}  // namespace plotkit
