// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "plotkit/annotation.hpp"
#include "plotkit/dataset.hpp"
#include "plotkit/judge.hpp"
#include "plotkit/planner.hpp"
#include "plotkit/prompts.hpp"
#include "support.hpp"

using namespace plotkit;
using namespace plotkit_test;

namespace {

struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  template <class A, class B>
  void equal(const A& a, const B& b, const std::string& what) {
    if (!(a == b)) {
      std::ostringstream os;
      os << what << ": got " << a << ", want " << b;
      failures.push_back(os.str());
    }
  }
};

void prompt_fidelity(Check& c) {
  for (const auto& name : prompts::template_names()) {
    const std::string golden = read_file(source_path("tests/golden/" + name + ".txt"));
    c.expect(!golden.empty(), "golden file for " + name);
    c.expect(prompts::dump(name) + "\n" == golden, "template " + name + " differs from golden");
  }
}

void parser_round_trip(Check& c) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    PlotDocument d = valid_doc(rng);
    const std::string text = render_plot(d);
    PlotDocument back = parse_plot(text);
    c.expect(back == d, "parse(render(d)) != d at doc " + std::to_string(i));
    c.expect(render_plot(back) == text, "render(parse(t)) != t at doc " + std::to_string(i));
  }
  PlotDocument transcript = parse_plot(read_file(source_path("tests/fixtures/transcript_plot.txt")));
  c.equal(transcript.outline.size(), std::size_t{4}, "transcript top points");
  const bool has_ava = std::any_of(transcript.characters.begin(), transcript.characters.end(),
                                   [](const Character& ch) { return ch.full_name == "Ava Rose"; });
  c.expect(has_ava, "transcript lacks Ava Rose");
}

void call_accounting(Check& c) {
  PipelineConfig cfg;
  cfg.seed = 1;
  cfg.candidates_per_step = 4;
  cfg.char_range = {4, 4};
  cfg.max_top_points = 4;
  cfg.sub_range = {3, 3};
  cfg.annotate_scenes = true;
  auto client = scripted_client(fixture_backend({}, false));
  PlotRun run = generate_plot(client, cfg);

  const std::int64_t k = 4, chars = 4, tops = 4, subs = 3;
  const std::int64_t items = tops + tops * subs;
  const std::int64_t closed_form = k * (1 + 1 + 2 * chars + tops + tops * subs) + items;
  c.equal(closed_form, std::int64_t{120}, "closed form");
  c.equal(run.meta.ledger.total_calls(), closed_form, "ledger total");
  c.equal(run.meta.expected_calls(), closed_form, "meta formula");
  c.equal(static_cast<std::int64_t>(run.doc.outline.size()), tops, "top points");
  c.equal(static_cast<std::int64_t>(run.doc.characters.size()), chars, "characters");
  c.expect(run.meta.valid, "generated plot is invalid");

  auto rank = [](Stage s) {
    switch (s) {
      case Stage::premise: return 0;
      case Stage::setting: return 1;
      case Stage::character_name:
      case Stage::character_portrait: return 2;
      case Stage::top_outline: return 3;
      case Stage::sub_outline: return 4;
      case Stage::annotation: return 5;
      case Stage::judge: return 6;
    }
    return 7;
  };
  const auto seq = run.meta.ledger.sequence();
  c.equal(static_cast<std::int64_t>(seq.size()), closed_form, "sequence length");
  for (std::size_t i = 1; i < seq.size(); ++i) {
    if (rank(seq[i - 1]) > rank(seq[i])) {
      c.expect(false, "stage order regresses at call " + std::to_string(i));
      break;
    }
  }
}

void filtering(Check& c) {
  auto plan = build_corpus(200,
                           {{ViolationCode::CHAR_COUNT, 8},
                            {ViolationCode::TOP_COUNT, 7},
                            {ViolationCode::SUB_COUNT, 7},
                            {ViolationCode::MISSING_TOP, 5},
                            {ViolationCode::LABEL_GAP, 5},
                            {ViolationCode::EMPTY_TEXT, 4},
                            {ViolationCode::DUPLICATE_NAME, 3}},
                           77);
  c.equal(plan.bad, std::int64_t{39}, "constructed bad");
  FilterResult f = filter_plots(plan.records, PipelineConfig{});
  c.equal(f.kept.size(), std::size_t{161}, "kept");
  c.equal(f.dropped.size(), std::size_t{39}, "dropped");
  c.expect(f.report == plan.expected_report, "per-code report differs from construction");
}

void judge_protocol(Check& c) {
  struct Row {
    Verdict v;
    bool swapped;
    const char* winner;
  };
  const Row rows[] = {{Verdict::A_WINS, false, "X"}, {Verdict::B_WINS, false, "Y"}, {Verdict::TIE, false, "TIE"},
                      {Verdict::A_WINS, true, "Y"},  {Verdict::B_WINS, true, "X"},  {Verdict::TIE, true, "TIE"}};
  for (const auto& r : rows) {
    const std::string got = r.swapped ? deshuffle(r.v, "Y", "X") : deshuffle(r.v, "X", "Y");
    c.equal(got, std::string(r.winner), "deshuffle");
  }
  const std::string sample = read_file(source_path("tests/fixtures/judge_sample_response.txt"));
  c.expect(parse_verdict(sample) == Verdict::B_WINS, "sample response is not B_WINS");

  auto records = [](std::int64_t x, std::int64_t y, std::int64_t t, Aspect a) {
    std::vector<ComparisonRecord> out;
    auto add = [&](std::int64_t n, const char* w) {
      for (std::int64_t i = 0; i < n; ++i) {
        ComparisonRecord r;
        r.aspect = a;
        r.source_a = "x";
        r.source_b = "y";
        r.winner = w;
        out.push_back(r);
      }
    };
    add(x, "x");
    add(y, "y");
    add(t, "TIE");
    return out;
  };
  auto overall = aggregate_winrates(records(229, 234, 37, Aspect::OVERALL)).at(0);
  c.equal(overall.pct_x, 45.8, "overall x");
  c.equal(overall.pct_y, 46.8, "overall y");
  c.equal(overall.pct_ties, 7.4, "overall ties");
  auto q4 = aggregate_winrates(records(118, 180, 2, Aspect::Q4)).at(0);
  c.equal(q4.pct_x, 39.3, "Q4 x");
  c.equal(q4.pct_y, 60.0, "Q4 y");
  c.equal(q4.pct_ties, 0.7, "Q4 ties");
}

void shuffle_debiasing(Check& c) {
  auto backend = std::make_shared<ScriptedBackend>(
      std::vector<ScriptedRule>{ScriptedRule::contains("act as an impartial judge", {"Plot A is better. [[A]]"})});
  auto client = scripted_client(backend);
  const int n = 10000;
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < n; ++i) {
    pairs.push_back({"pair-" + std::to_string(i), "P.", {"base", "plot one"}, {"tuned", "plot two"}});
  }
  auto recs = judge_pairs(client, pairs, Aspect::OVERALL, 0, 4);
  int presented_a = 0;
  int base_wins = 0;
  for (const auto& r : recs) {
    presented_a += r.presented_verdict == Verdict::A_WINS;
    base_wins += r.winner == "base";
  }
  c.equal(presented_a, n, "presented A verdicts");
  const double rate = 100.0 * base_wins / n;
  c.expect(rate >= 48.0 && rate <= 52.0, "de-shuffled base win rate " + std::to_string(rate));
  auto row = aggregate_winrates(recs).at(0);
  c.expect(std::abs(row.pct_x - 50.0) <= 2.0 && std::abs(row.pct_y - 50.0) <= 2.0, "aggregated rates off 50%");
}

void dataset_conservation(Check& c) {
  PipelineConfig gen;
  gen.seed = 300;
  gen.candidates_per_step = 1;
  gen.annotate_scenes = false;
  auto client = scripted_client(fixture_backend());
  std::ostringstream out;
  BatchSummary s = batch_generate(client, gen, 100, 4, out, "batch");
  c.equal(s.succeeded, std::int64_t{100}, "batch succeeded");
  std::istringstream in(out.str());
  auto records = read_records(in);
  c.equal(records.size(), std::size_t{100}, "records written");

  PipelineConfig strict = gen;
  strict.char_range = {4, 6};
  FilterResult f = filter_plots(records, strict);
  c.equal(f.kept.size() + f.dropped.size(), std::size_t{100}, "kept + dropped");
  c.expect(!f.dropped.empty() && !f.kept.empty(), "strict filter should split the batch");

  std::ostringstream sft_out;
  SftExportResult e = export_sft(f.kept, sft_out, strict);
  c.equal(static_cast<std::size_t>(e.lines), f.kept.size(), "sft lines");
  std::istringstream sft_in(sft_out.str());
  std::string line;
  std::size_t i = 0;
  while (std::getline(sft_in, line)) {
    auto j = json::parse(line);
    SftPair p{j.at("prompt").get<std::string>(), j.at("response").get<std::string>()};
    const std::string normal = render_plot(parse_plot(f.kept.at(i).text));
    c.expect(sft_reconstruct(p) == normal, "sft line " + std::to_string(i) + " does not reconstruct");
    ++i;
  }
  c.equal(i, f.kept.size(), "sft lines read");
}

std::string words(std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += i ? " word" : "word";
  return out;
}

void annotation_service(Check& c) {
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 100; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "p%03d", i);
    pairs.push_back({id, "Premise.", {"base", "A" + std::to_string(i)}, {"tuned", "B" + std::to_string(i)}});
  }
  auto full = [](Choice ch) {
    ChoiceSet s;
    for (Question q : kChoiceQuestions) s[q] = ch;
    return s;
  };

  {
    AnnotationService svc(pairs, std::make_shared<AnnotationStore>());
    AnnotationResponse r{"p000", "a", full(Choice::PLOT_A), words(24), ""};
    bool rejected = false;
    try {
      svc.submit(r);
    } catch (const ValidationError& e) {
      rejected = e.has(ValidationCode::WORD_COUNT);
    }
    c.expect(rejected, "24-word explanation accepted");
    r.q2_explanation = words(25);
    svc.submit(r);
    bool dup = false;
    try {
      svc.submit(r);
    } catch (const DuplicateError&) {
      dup = true;
    }
    c.expect(dup, "duplicate accepted");
  }

  {
    const auto path = std::filesystem::temp_directory_path() /
                      ("plotkit_acceptance_" + std::to_string(::getpid()) + ".jsonl");
    std::filesystem::remove(path);
    {
      AnnotationService svc(pairs, std::make_shared<AnnotationStore>(path));
      svc.submit({"p001", "a", full(Choice::PLOT_B), words(25), ""});
      svc.submit({"p002", "a", full(Choice::BOTH), words(25), ""});
    }
    auto store = std::make_shared<AnnotationStore>(path);
    c.equal(store->size(), std::size_t{2}, "responses after restart");
    AnnotationService svc(pairs, store);
    bool dup = false;
    try {
      svc.submit({"p001", "a", full(Choice::PLOT_A), words(25), ""});
    } catch (const DuplicateError&) {
      dup = true;
    }
    c.expect(dup, "duplicate accepted after restart");
    std::filesystem::remove(path);
  }

  {
    AnnotationService svc(pairs, std::make_shared<AnnotationStore>());
    std::mt19937_64 rng(9);
    std::vector<AnnotationResponse> all;
    for (int i = 0; i < 1000; ++i) {
      AnnotationResponse r{pairs[static_cast<std::size_t>(i % 100)].pair_id, "ann" + std::to_string(i / 100), {},
                           words(25), ""};
      for (Question q : kChoiceQuestions) r.choices[q] = kAllChoices[rng() % 4];
      all.push_back(svc.submit(r));
    }
    for (Question q : kChoiceQuestions) {
      std::vector<std::pair<std::string, std::string>> want;
      for (const auto& r : all) {
        const Choice ch = r.choices.at(q);
        if (ch != Choice::PLOT_A && ch != Choice::PLOT_B) continue;
        const auto& p = pairs[static_cast<std::size_t>(std::stoi(r.pair_id.substr(1)))];
        want.emplace_back(ch == Choice::PLOT_A ? p.plot_a.text : p.plot_b.text,
                          ch == Choice::PLOT_A ? p.plot_b.text : p.plot_a.text);
      }
      std::vector<std::pair<std::string, std::string>> got;
      for (const auto& l : svc.export_preferences(q)) got.emplace_back(l.chosen_text, l.rejected_text);
      c.expect(got == want, "export differs for " + std::string(to_string(q)));
    }
  }

  {
    // Per-mille counts matching the reference Q4 and Q6 rows.
    const std::array<int, 4> q4 = {290, 380, 130, 200};
    const std::array<int, 4> q6 = {300, 370, 90, 240};
    std::vector<ChoiceSet> sets(1000);
    std::mt19937_64 rng(3);
    for (auto [q, counts] : {std::pair{Question::Q4, q4}, std::pair{Question::Q6, q6}}) {
      std::vector<Choice> col;
      for (int k = 0; k < 4; ++k) col.insert(col.end(), counts[k], kAllChoices[k]);
      std::shuffle(col.begin(), col.end(), rng);
      for (std::size_t i = 0; i < sets.size(); ++i) sets[i][q] = col[i];
    }
    AnnotationService svc(pairs, std::make_shared<AnnotationStore>());
    for (std::size_t i = 0; i < sets.size(); ++i) {
      ChoiceSet s = full(Choice::BOTH);
      s[Question::Q4] = sets[i][Question::Q4];
      s[Question::Q6] = sets[i][Question::Q6];
      svc.submit({pairs[i % 100].pair_id, "ann" + std::to_string(i / 100), s, words(25), ""});
    }
    const LabelTable t = svc.label_stats();
    const int want_q4[] = {29, 38, 13, 20};
    const int want_q6[] = {30, 37, 9, 24};
    for (int k = 0; k < 4; ++k) {
      c.equal(t.percent(Question::Q4, kAllChoices[k]), std::int64_t{want_q4[k]}, "Q4 percent");
      c.equal(t.percent(Question::Q6, kAllChoices[k]), std::int64_t{want_q6[k]}, "Q6 percent");
    }
  }
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void(Check&)>> criteria[] = {
      {"prompt fidelity", prompt_fidelity},
      {"parser round trip", parser_round_trip},
      {"call accounting", call_accounting},
      {"corpus filtering", filtering},
      {"judge protocol", judge_protocol},
      {"shuffle debiasing", shuffle_debiasing},
      {"dataset conservation", dataset_conservation},
      {"annotation service", annotation_service},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    Check c;
    const auto start = std::chrono::steady_clock::now();
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    const bool ok = c.failures.empty();
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << index << ": " << name << " (" << ms << " ms)\n";
    for (const auto& f : c.failures) std::cout << "    " << f << '\n';
  }
  return failed == 0 ? 0 : 1;
}
