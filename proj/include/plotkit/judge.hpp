#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "plotkit/errors.hpp"
#include "plotkit/llm.hpp"
#include "plotkit/pairs.hpp"

namespace plotkit {

enum class Aspect { OVERALL, Q1, Q3, Q4, Q5, Q6 };

std::string_view to_string(Aspect a);
std::optional<Aspect> aspect_from_string(std::string_view s);
// The "Your evaluation should focus on ..." sentence for an aspect.
std::string focus_sentence(Aspect a);

enum class Verdict { A_WINS, B_WINS, TIE };

std::string_view to_string(Verdict v);          // "A", "B", "C"
std::optional<Verdict> verdict_from_string(std::string_view s);

class NoVerdict : public Error {
 public:
  NoVerdict() : Error("judgment contains no [[A]], [[B]] or [[C]] marker") {}
};

class MixedPairError : public Error {
 public:
  using Error::Error;
};

class EmptyGroupError : public Error {
 public:
  using Error::Error;
};

std::string build_judge_prompt(std::string_view plot_a_text, std::string_view plot_b_text, Aspect aspect);

// Verdict of the last well-formed marker; throws NoVerdict when none.
Verdict parse_verdict(std::string_view raw);

struct Presentation {
  PlotVariant first;   // shown as "story plot A"
  PlotVariant second;  // shown as "story plot B"
  bool swapped = false;
};

// Swaps the pair with probability 1/2 drawn from rng.
Presentation shuffle_positions(const PreferencePair& pair, std::mt19937_64& rng);

// Winner tag for a presented verdict, or "TIE".
std::string deshuffle(Verdict presented, std::string_view presented_first, std::string_view presented_second);

inline constexpr std::string_view kTie = "TIE";

struct ComparisonRecord {
  std::string pair_id;
  Aspect aspect = Aspect::OVERALL;
  std::string source_a;  // the pair's own plot_a / plot_b tags
  std::string source_b;
  std::string presented_first;
  std::string presented_second;
  std::string raw;
  Verdict presented_verdict = Verdict::TIE;
  std::string winner;  // source tag or "TIE"
  std::uint64_t seed = 0;
  bool unparsed = false;
};

// JSONL: {pair_id, aspect, source_a, source_b, presented_first,
// presented_second, raw, verdict, winner, seed, unparsed}
void to_json(nlohmann::json& j, const ComparisonRecord& r);
void from_json(const nlohmann::json& j, ComparisonRecord& r);

struct JudgeOptions {
  double temperature = 0.0;
  int max_tokens = 1024;
  bool shuffle = true;
};

// One judged comparison. A judgment without a verdict is retried once and
// then recorded as a flagged tie.
ComparisonRecord run_comparison(LlmClient& client, const PreferencePair& pair, Aspect aspect,
                                std::uint64_t seed, const JudgeOptions& opts = {});

// Judges every pair; comparison i uses seed base_seed + i. Output order
// follows input order regardless of `workers`.
std::vector<ComparisonRecord> judge_pairs(LlmClient& client, const std::vector<PreferencePair>& pairs,
                                          Aspect aspect, std::uint64_t base_seed, int workers = 1,
                                          const JudgeOptions& opts = {});

struct WinRateRow {
  Aspect aspect = Aspect::OVERALL;
  std::string source_x;
  std::string source_y;
  std::int64_t wins_x = 0;
  std::int64_t wins_y = 0;
  std::int64_t ties = 0;
  std::int64_t total = 0;
  // Percentages rounded half-up to one decimal.
  double pct_x = 0;
  double pct_y = 0;
  double pct_ties = 0;
};

// Percentage of count/total in tenths, rounded half-up (exact integer math).
std::int64_t percent_tenths(std::int64_t count, std::int64_t total);

// One row per aspect present, in Aspect order. Throws EmptyGroupError for no
// records (or none for `only`), MixedPairError when a group mixes more than
// two source tags.
std::vector<WinRateRow> aggregate_winrates(const std::vector<ComparisonRecord>& records,
                                           std::optional<Aspect> only = std::nullopt);

std::string format_winrate_table(const std::vector<WinRateRow>& rows);
nlohmann::json winrates_to_json(const std::vector<WinRateRow>& rows);

}  // namespace plotkit
