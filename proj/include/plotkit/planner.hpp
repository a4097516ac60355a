#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "plotkit/llm.hpp"
#include "plotkit/pipeline_config.hpp"
#include "plotkit/plot.hpp"
#include "plotkit/prompts.hpp"

namespace plotkit {

enum class SelectionReason { VALID_PARSE, LENGTH_HEURISTIC, ONLY_CANDIDATE };

std::string_view to_string(SelectionReason r);

struct StepOutcome {
  Stage stage = Stage::premise;
  std::string label;  // e.g. "premise", "character 2 name", "2b"
  std::string chosen;
  std::vector<std::string> candidates;
  SelectionReason selection_reason = SelectionReason::ONLY_CANDIDATE;
  int retries_used = 0;
};

void to_json(nlohmann::json& j, const StepOutcome& o);

// Optional reranker. When set it replaces the length rule: the highest score
// wins among the candidates that survive the other rules.
using CandidateScorer = std::function<double(Stage, std::string_view)>;

struct SentenceBounds {
  std::size_t min = 1;
  std::size_t max = 3;
  bool contains(std::size_t n) const { return n >= min && n <= max; }
};

struct Selection {
  std::optional<std::size_t> index;  // into the candidate list
  SelectionReason reason = SelectionReason::ONLY_CANDIDATE;
};

// Picks the best candidate: drops empty ones and near-duplicates of `existing`
// lines or of an earlier candidate, prefers those within `bounds`, then the
// longest (or best scored). Ties go to the earliest.
Selection select_candidate(const std::vector<std::string>& candidates,
                           const std::vector<std::string>& existing, SentenceBounds bounds,
                           const CandidateScorer& scorer = {}, Stage stage = Stage::premise);

// "THE END", "End.", "End of outline" and the like.
bool is_end_marker(std::string_view candidate);

// Stage-specific cleanup of raw completions. nullopt means unusable.
std::optional<std::string> normalize_premise(std::string_view raw);
std::optional<std::string> normalize_setting(std::string_view raw);
std::optional<std::string> normalize_name(std::string_view raw);
std::optional<std::string> normalize_portrait(std::string_view raw, std::string_view name);
std::optional<std::string> normalize_top_point(std::string_view raw);
// Up to two labeled points from one sub-outline completion.
std::vector<std::string> split_sub_points(std::string_view raw);

// Mutable state of one plot run. Every stage function appends its outcomes
// and charges its calls to `ledger`.
struct PlanState {
  PlanState(LlmClient client, PipelineConfig cfg);

  LlmClient client;
  PipelineConfig cfg;
  CallLedger ledger;
  std::vector<StepOutcome> outcomes;
  std::mt19937_64 rng;
  CandidateScorer scorer;
  int wasted_attempts = 0;  // attempts that produced no usable candidate
  int sub_steps = 0;
  int annotation_calls = 0;

  // Uniform draw from an inclusive range.
  int draw(IntRange range);
};

std::string generate_premise(PlanState& st);
std::string generate_setting(PlanState& st, std::string_view premise);
std::vector<Character> generate_characters(PlanState& st, std::string_view premise, std::string_view setting);

// ctx carries premise, setting and the characters block; current_top_index 0.
std::vector<std::string> generate_top_outline(PlanState& st, const prompts::OutlineContext& ctx);

// Expands ctx.current_top_index into `target` sub-points. Non-final points go
// through the completion wrapper with later points as the suffix; the final
// point is prompted directly.
std::vector<std::string> expand_point(PlanState& st, const prompts::OutlineContext& ctx, int target);

// Fills scene and mentioned_characters on every outline item. One call per
// item; failures leave the item unannotated.
void annotate_items(PlanState& st, PlotDocument& doc);

// Parses an annotation reply, keeping only names present in `cast`.
ItemAnnotations parse_annotation_reply(std::string_view reply, const std::vector<Character>& cast);

struct RunMeta {
  std::string model;
  std::uint64_t seed = 0;
  CallLedger ledger;
  std::vector<StepOutcome> outcomes;
  bool valid = false;
  std::vector<Violation> violations;
  int candidates_per_call_factor = 1;  // k when candidates cost one call each
  int premise_steps = 1;               // 0 when the premise was supplied
  int characters = 0;
  int top_points = 0;
  int sub_points = 0;
  int sub_steps = 0;
  int wasted_attempts = 0;
  int annotation_calls = 0;
  std::string started_at;
  std::string finished_at;

  // factor * (premise + setting + 2c + t + sub_steps + wasted) + annotations
  std::int64_t expected_calls() const;
};

void to_json(nlohmann::json& j, const RunMeta& m);

struct PlanOptions {
  std::optional<std::string> fixed_premise;
  CandidateScorer scorer;
};

struct PlotRun {
  PlotDocument doc;
  RunMeta meta;
};

// Full pipeline: premise, setting, characters, every top point, then every
// sub-point in breadth-first order, then optional annotations. The client is
// forked so scripted backends replay from the start on each run. Invalid
// documents are returned with meta.valid == false. StepFailed surfaces as
// PipelineFailed.
PlotRun generate_plot(const LlmClient& client, const PipelineConfig& cfg, const PlanOptions& opts = {});

}  // namespace plotkit
