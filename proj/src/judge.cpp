#include "plotkit/judge.hpp"

#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace plotkit {
namespace {

constexpr std::string_view kOverallSentence = "Your evaluation should focus on the overall qualities.";

std::string format_pct(std::int64_t tenths) {
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

Question question_for(Aspect a) {
  switch (a) {
    case Aspect::Q1: return Question::Q1;
    case Aspect::Q3: return Question::Q3;
    case Aspect::Q4: return Question::Q4;
    case Aspect::Q5: return Question::Q5;
    case Aspect::Q6: return Question::Q6;
    case Aspect::OVERALL: break;
  }
  throw PreconditionError("OVERALL has no preference question");
}

}  // namespace

std::string_view to_string(Aspect a) {
  switch (a) {
    case Aspect::OVERALL: return "OVERALL";
    case Aspect::Q1: return "Q1";
    case Aspect::Q3: return "Q3";
    case Aspect::Q4: return "Q4";
    case Aspect::Q5: return "Q5";
    case Aspect::Q6: return "Q6";
  }
  return "OVERALL";
}

std::optional<Aspect> aspect_from_string(std::string_view s) {
  for (Aspect a : {Aspect::OVERALL, Aspect::Q1, Aspect::Q3, Aspect::Q4, Aspect::Q5, Aspect::Q6}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

std::string focus_sentence(Aspect a) {
  if (a == Aspect::OVERALL) return std::string(kOverallSentence);
  return "Your evaluation should focus on the Aspect: " + std::string(question_text(question_for(a)));
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::A_WINS: return "A";
    case Verdict::B_WINS: return "B";
    case Verdict::TIE: return "C";
  }
  return "C";
}

std::optional<Verdict> verdict_from_string(std::string_view s) {
  if (s == "A") return Verdict::A_WINS;
  if (s == "B") return Verdict::B_WINS;
  if (s == "C") return Verdict::TIE;
  return std::nullopt;
}

std::string build_judge_prompt(std::string_view plot_a_text, std::string_view plot_b_text, Aspect aspect) {
  std::string out =
      "Please act as an impartial judge and evaluate the quality of the story plots generated by two "
      "AI models. The two story plots have the same premise.\n"
      "You should choose the story plots that have better qualities. ";
  out += focus_sentence(aspect);
  out +=
      "\nBegin your evaluation by comparing the two story plots and provide a short explanation. "
      "Avoid any position biases and ensure that the order in which the story plots were presented "
      "does not influence your decision.\n"
      "Do not allow the length of the story plots to influence your evaluation. Be as objective as "
      "possible. After providing your explanation, output your final verdict by strictly following "
      "this format: \"[[A]]\" if story plot A is better, \"[[B]]\" if story plot B is better, and "
      "\"[[C]]\" for a tie.\n\n"
      "[The Start of story plot A]\n\n";
  out += plot_a_text;
  out += "\n\n[The End of story plot A]\n\n[The Start of story plot B]\n\n";
  out += plot_b_text;
  out += "\n\n[The End of story plot B]";
  return out;
}

Verdict parse_verdict(std::string_view raw) {
  static constexpr std::pair<std::string_view, Verdict> markers[] = {
      {"[[A]]", Verdict::A_WINS}, {"[[B]]", Verdict::B_WINS}, {"[[C]]", Verdict::TIE}};
  std::optional<std::size_t> best_pos;
  Verdict best = Verdict::TIE;
  for (const auto& [marker, verdict] : markers) {
    auto pos = raw.rfind(marker);
    if (pos != std::string_view::npos && (!best_pos || pos > *best_pos)) {
      best_pos = pos;
      best = verdict;
    }
  }
  if (!best_pos) throw NoVerdict();
  return best;
}

Presentation shuffle_positions(const PreferencePair& pair, std::mt19937_64& rng) {
  const bool swap = (rng() >> 63) != 0;
  if (swap) return {pair.plot_b, pair.plot_a, true};
  return {pair.plot_a, pair.plot_b, false};
}

std::string deshuffle(Verdict presented, std::string_view presented_first, std::string_view presented_second) {
  switch (presented) {
    case Verdict::A_WINS: return std::string(presented_first);
    case Verdict::B_WINS: return std::string(presented_second);
    case Verdict::TIE: break;
  }
  return std::string(kTie);
}

void to_json(nlohmann::json& j, const ComparisonRecord& r) {
  j = nlohmann::json{{"pair_id", r.pair_id},
                     {"aspect", to_string(r.aspect)},
                     {"source_a", r.source_a},
                     {"source_b", r.source_b},
                     {"presented_first", r.presented_first},
                     {"presented_second", r.presented_second},
                     {"raw", r.raw},
                     {"verdict", to_string(r.presented_verdict)},
                     {"winner", r.winner},
                     {"seed", r.seed},
                     {"unparsed", r.unparsed}};
}

void from_json(const nlohmann::json& j, ComparisonRecord& r) {
  j.at("pair_id").get_to(r.pair_id);
  auto aspect = aspect_from_string(j.at("aspect").get<std::string>());
  if (!aspect) throw FormatError("comparison record: unknown aspect");
  r.aspect = *aspect;
  r.source_a = j.value("source_a", std::string{});
  r.source_b = j.value("source_b", std::string{});
  j.at("presented_first").get_to(r.presented_first);
  r.presented_second = j.value("presented_second", std::string{});
  r.raw = j.value("raw", std::string{});
  auto verdict = verdict_from_string(j.at("verdict").get<std::string>());
  if (!verdict) throw FormatError("comparison record: unknown verdict");
  r.presented_verdict = *verdict;
  j.at("winner").get_to(r.winner);
  r.seed = j.value("seed", std::uint64_t{0});
  r.unparsed = j.value("unparsed", false);
  if (r.source_a.empty() || r.source_b.empty()) {
    throw FormatError("comparison record: source_a and source_b are required");
  }
  if (r.presented_second.empty()) {
    r.presented_second = r.presented_first == r.source_a ? r.source_b : r.source_a;
  }
}

ComparisonRecord run_comparison(LlmClient& client, const PreferencePair& pair, Aspect aspect,
                                std::uint64_t seed, const JudgeOptions& opts) {
  std::mt19937_64 rng(seed);
  Presentation shown = opts.shuffle ? shuffle_positions(pair, rng) : Presentation{pair.plot_a, pair.plot_b, false};

  GenerationRequest req;
  req.user = build_judge_prompt(shown.first.text, shown.second.text, aspect);
  req.temperature = opts.temperature;
  req.max_tokens = opts.max_tokens;
  req.n_candidates = 1;

  ComparisonRecord rec;
  rec.pair_id = pair.pair_id;
  rec.aspect = aspect;
  rec.source_a = pair.plot_a.source;
  rec.source_b = pair.plot_b.source;
  rec.presented_first = shown.first.source;
  rec.presented_second = shown.second.source;
  rec.seed = seed;

  for (int attempt = 0; attempt < 2; ++attempt) {
    rec.raw = client.chat_generate(req, Stage::judge).candidates.front();
    try {
      rec.presented_verdict = parse_verdict(rec.raw);
      rec.unparsed = false;
      break;
    } catch (const NoVerdict&) {
      rec.presented_verdict = Verdict::TIE;
      rec.unparsed = true;
    }
  }
  rec.winner = deshuffle(rec.presented_verdict, rec.presented_first, rec.presented_second);
  return rec;
}

std::vector<ComparisonRecord> judge_pairs(LlmClient& client, const std::vector<PreferencePair>& pairs,
                                          Aspect aspect, std::uint64_t base_seed, int workers,
                                          const JudgeOptions& opts) {
  std::vector<ComparisonRecord> out(pairs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    while (true) {
      std::size_t i = next++;
      if (i >= pairs.size()) return;
      {
        std::lock_guard lock(failure_mu);
        if (failure) return;
      }
      try {
        out[i] = run_comparison(client, pairs[i], aspect, base_seed + i, opts);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int n = std::max(1, workers);
  std::vector<std::thread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::int64_t percent_tenths(std::int64_t count, std::int64_t total) {
  if (total <= 0) return 0;
  return (count * 2000 + total) / (2 * total);
}

std::vector<WinRateRow> aggregate_winrates(const std::vector<ComparisonRecord>& records,
                                           std::optional<Aspect> only) {
  std::map<Aspect, WinRateRow> groups;
  for (const auto& r : records) {
    if (only && r.aspect != *only) continue;
    auto [it, fresh] = groups.try_emplace(r.aspect);
    WinRateRow& row = it->second;
    if (fresh) {
      row.aspect = r.aspect;
      row.source_x = r.source_a;
      row.source_y = r.source_b;
    }
    const bool same = (r.source_a == row.source_x && r.source_b == row.source_y) ||
                      (r.source_a == row.source_y && r.source_b == row.source_x);
    if (!same) {
      throw MixedPairError("aspect " + std::string(to_string(r.aspect)) + " mixes source tags " +
                           row.source_x + ", " + row.source_y + ", " + r.source_a + ", " + r.source_b);
    }
    if (r.winner == row.source_x) {
      ++row.wins_x;
    } else if (r.winner == row.source_y) {
      ++row.wins_y;
    } else if (r.winner == kTie) {
      ++row.ties;
    } else {
      throw MixedPairError("winner '" + r.winner + "' is not one of the group's sources");
    }
    ++row.total;
  }
  if (groups.empty()) {
    throw EmptyGroupError(only ? "no comparison records for aspect " + std::string(to_string(*only))
                               : std::string("no comparison records"));
  }
  std::vector<WinRateRow> rows;
  for (auto& [aspect, row] : groups) {
    row.pct_x = static_cast<double>(percent_tenths(row.wins_x, row.total)) / 10.0;
    row.pct_y = static_cast<double>(percent_tenths(row.wins_y, row.total)) / 10.0;
    row.pct_ties = static_cast<double>(percent_tenths(row.ties, row.total)) / 10.0;
    rows.push_back(row);
  }
  return rows;
}

std::string format_winrate_table(const std::vector<WinRateRow>& rows) {
  std::ostringstream os;
  for (const auto& row : rows) {
    os << "Aspect " << to_string(row.aspect) << " (n=" << row.total << ")\n";
    os << "  " << row.source_x << " Wins: " << format_pct(percent_tenths(row.wins_x, row.total)) << "% ("
       << row.wins_x << ")\n";
    os << "  " << row.source_y << " Wins: " << format_pct(percent_tenths(row.wins_y, row.total)) << "% ("
       << row.wins_y << ")\n";
    os << "  Ties: " << format_pct(percent_tenths(row.ties, row.total)) << "% (" << row.ties << ")\n";
  }
  return os.str();
}

nlohmann::json winrates_to_json(const std::vector<WinRateRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& row : rows) {
    out.push_back({{"aspect", to_string(row.aspect)},
                   {"source_x", row.source_x},
                   {"source_y", row.source_y},
                   {"wins_x", row.wins_x},
                   {"wins_y", row.wins_y},
                   {"ties", row.ties},
                   {"total", row.total},
                   {"pct_x", row.pct_x},
                   {"pct_y", row.pct_y},
                   {"pct_ties", row.pct_ties}});
  }
  return out;
}

}  // namespace plotkit
