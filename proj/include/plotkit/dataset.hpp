#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "plotkit/llm.hpp"
#include "plotkit/pairs.hpp"
#include "plotkit/pipeline_config.hpp"
#include "plotkit/planner.hpp"
#include "plotkit/plot.hpp"

namespace plotkit {

struct RecordMeta {
  std::string model;
  std::uint64_t seed = 0;
  std::int64_t total_calls = 0;
  std::string started_at;
  std::string finished_at;

  bool operator==(const RecordMeta&) const = default;
};

// One line of a plot corpus. Failed attempts are kept as records carrying
// `error` and no text.
struct PlotRecord {
  std::string id;
  std::string premise;
  std::string text;  // canonical plot text
  bool valid = false;
  std::vector<Violation> violations;
  RecordMeta meta;
  std::string source;  // generator tag, optional
  std::optional<std::string> error;

  bool operator==(const PlotRecord&) const = default;
};

// {id, premise, text, valid, violations, meta{model, seed, total_calls,
//  started_at, finished_at}, source?, error?}
void to_json(nlohmann::json& j, const PlotRecord& r);
void from_json(const nlohmann::json& j, PlotRecord& r);

std::vector<PlotRecord> read_records(std::istream& in);

// Content id: hash of premise, seed and source tag.
std::string record_id(std::string_view premise, std::uint64_t seed, std::string_view source);

PlotRecord make_record(const PlotRun& run, std::string_view source = {});
PlotRecord error_record(std::uint64_t seed, std::string_view source, std::string_view model,
                        std::string_view what);

struct BatchSummary {
  std::int64_t attempted = 0;
  std::int64_t succeeded = 0;
  std::int64_t failed = 0;
  std::int64_t valid = 0;
  std::int64_t total_calls = 0;
};

nlohmann::json to_json(const BatchSummary& s);

// n plot attempts over `workers` threads. Attempt i runs with seed
// cfg.seed + i. Records are written in attempt order, one JSON line each.
// Pipeline and backend errors become error records; a failing sink throws
// SinkError and stops the batch.
BatchSummary batch_generate(const LlmClient& client, const PipelineConfig& cfg, int n, int workers,
                            std::ostream& out, std::string_view source = {});

struct FilterResult {
  std::vector<PlotRecord> kept;
  std::vector<PlotRecord> dropped;
  // Records per violation code; error records count as PIPELINE_FAILED and
  // unparseable text as PARSE_ERROR.
  std::map<std::string, std::int64_t> report;
};

// Re-parses and re-validates every record against cfg.
FilterResult filter_plots(const std::vector<PlotRecord>& records, const PipelineConfig& cfg);

struct SkippedRecord {
  std::string id;
  std::string reason;
};

struct SftExportResult {
  std::int64_t lines = 0;
  std::vector<SkippedRecord> skipped;
};

// Writes {prompt, response} lines for valid records.
SftExportResult export_sft(const std::vector<PlotRecord>& records, std::ostream& out,
                           const PipelineConfig& cfg = {});

struct Generator {
  LlmClient client;
  PipelineConfig cfg;
  std::string source;
};

struct PairSummary {
  std::int64_t pairs = 0;
  std::int64_t failed = 0;
  std::int64_t duplicates = 0;
};

std::string pair_id(std::string_view premise, std::string_view source_a, std::string_view source_b);

// One plot per generator for each distinct premise, both under that premise.
// Premise i uses each generator's cfg.seed + i. Failures and duplicate
// premises are reported to `log` and skipped.
PairSummary make_pairs(const std::vector<std::string>& premises, const Generator& gen_a, const Generator& gen_b,
                       std::ostream& out, std::ostream* log = nullptr);

// Answers of one annotation to the choice questions.
using ChoiceSet = std::map<Question, Choice>;

struct LabelTable {
  // counts[q][c] for c in kAllChoices order.
  std::map<Question, std::array<std::int64_t, 4>> counts;

  std::int64_t total(Question q) const;
  // Integer percentage, rounded half-up.
  std::int64_t percent(Question q, Choice c) const;
};

// Table of A/B/Both/Neither labels per choice question. Empty input gives an
// all-zero table.
LabelTable corpus_stats(const std::vector<ChoiceSet>& annotations);
std::string format_label_table(const LabelTable& table);
nlohmann::json label_table_to_json(const LabelTable& table);

std::int64_t percent_rounded(std::int64_t count, std::int64_t total);

// Seeded shuffle, then the first round(fraction * n) records go to `first`.
struct Split {
  std::vector<PlotRecord> first;
  std::vector<PlotRecord> second;
};
Split shuffle_split(std::vector<PlotRecord> records, double fraction, std::uint64_t seed);

}  // namespace plotkit
