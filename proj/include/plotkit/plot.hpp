#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "plotkit/pipeline_config.hpp"

namespace plotkit {

struct Character {
  std::string full_name;
  std::string portrait;

  bool operator==(const Character&) const = default;
};

// An outline item. Top-level labels are "1", "2", ...; sub-level labels carry
// the parent number and a letter ("1a", "1b", ...). A sub-level label found
// at the top level of PlotDocument::outline is an orphan whose parent point
// is missing or misplaced; validate_structure reports it.
struct OutlineSection {
  std::string label;
  std::string text;
  std::optional<std::string> scene;
  std::vector<std::string> mentioned_characters;
  std::vector<OutlineSection> children;

  bool operator==(const OutlineSection&) const = default;
};

struct PlotDocument {
  std::string premise;
  std::string setting;
  std::vector<Character> characters;
  std::vector<OutlineSection> outline;

  bool operator==(const PlotDocument&) const = default;
};

enum class ViolationCode {
  CHAR_COUNT,
  TOP_COUNT,
  MISSING_TOP,
  SUB_COUNT,
  LABEL_GAP,
  EMPTY_TEXT,
  DUPLICATE_NAME,
  NESTING,
};

std::string_view to_string(ViolationCode code);
std::optional<ViolationCode> violation_code_from_string(std::string_view s);

struct Violation {
  ViolationCode code;
  std::string location;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  bool valid = true;
  std::vector<Violation> violations;

  bool has(ViolationCode code) const;
};

// Label helpers. A top label is all digits; a sub label is digits + one
// lowercase letter.
bool is_top_label(std::string_view label);
bool is_sub_label(std::string_view label);

// Parses the plot text format. Throws ParseError at the first structural
// problem (missing section header, malformed label, stray text).
PlotDocument parse_plot(std::string_view raw);

// Canonical text:
//
//   Premise: ...
//
//   Settings: ...
//
//   Characters:
//   Full Name: portrait
//
//   Outline:
//   1. text Scene: scene. Characters: A, B
//       1a. text ...
//
// "Scene:" is emitted only when a scene is present, "Characters:" only when
// the mention list is non-empty.
std::string render_plot(const PlotDocument& doc);

ValidationReport validate_structure(const PlotDocument& doc, const PipelineConfig& cfg);

struct SftPair {
  std::string prompt;
  std::string response;
};

// prompt is the premise; response is the canonical text after the premise
// section. sft_reconstruct(split_sft(d)) == render_plot(d).
SftPair split_sft(const PlotDocument& doc);
std::string sft_reconstruct(const SftPair& pair);

// Splits "... Scene: S. Characters: A, B" tail annotations off an item line.
struct ItemAnnotations {
  std::string text;
  std::optional<std::string> scene;
  std::vector<std::string> characters;
};
ItemAnnotations split_annotations(std::string_view item_text);

void to_json(nlohmann::json& j, const Character& c);
void from_json(const nlohmann::json& j, Character& c);
void to_json(nlohmann::json& j, const OutlineSection& s);
void from_json(const nlohmann::json& j, OutlineSection& s);
void to_json(nlohmann::json& j, const PlotDocument& d);
void from_json(const nlohmann::json& j, PlotDocument& d);
void to_json(nlohmann::json& j, const Violation& v);
void from_json(const nlohmann::json& j, Violation& v);

}  // namespace plotkit
