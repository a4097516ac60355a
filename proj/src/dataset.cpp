#include "plotkit/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "plotkit/errors.hpp"
#include "plotkit/text.hpp"

namespace plotkit {
namespace {

constexpr std::string_view kPipelineFailed = "PIPELINE_FAILED";
constexpr std::string_view kParseError = "PARSE_ERROR";

void write_line(std::ostream& out, const nlohmann::json& j) {
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw SinkError("output stream failed");
}

std::optional<std::string> revalidate(const PlotRecord& r, const PipelineConfig& cfg,
                                      std::vector<Violation>& violations) {
  if (r.error) return std::string(kPipelineFailed);
  try {
    violations = validate_structure(parse_plot(r.text), cfg).violations;
  } catch (const ParseError&) {
    return std::string(kParseError);
  }
  return std::nullopt;
}

}  // namespace

void to_json(nlohmann::json& j, const PlotRecord& r) {
  j = nlohmann::json{{"id", r.id},
                     {"premise", r.premise},
                     {"text", r.text},
                     {"valid", r.valid},
                     {"violations", r.violations},
                     {"meta",
                      {{"model", r.meta.model},
                       {"seed", r.meta.seed},
                       {"total_calls", r.meta.total_calls},
                       {"started_at", r.meta.started_at},
                       {"finished_at", r.meta.finished_at}}}};
  if (!r.source.empty()) j["source"] = r.source;
  if (r.error) j["error"] = *r.error;
}

void from_json(const nlohmann::json& j, PlotRecord& r) {
  j.at("id").get_to(r.id);
  r.premise = j.value("premise", std::string{});
  r.text = j.value("text", std::string{});
  r.valid = j.value("valid", false);
  r.violations = j.value("violations", std::vector<Violation>{});
  r.meta = {};
  if (j.contains("meta")) {
    const auto& m = j["meta"];
    r.meta.model = m.value("model", std::string{});
    r.meta.seed = m.value("seed", std::uint64_t{0});
    r.meta.total_calls = m.value("total_calls", std::int64_t{0});
    r.meta.started_at = m.value("started_at", std::string{});
    r.meta.finished_at = m.value("finished_at", std::string{});
  }
  r.source = j.value("source", std::string{});
  r.error.reset();
  if (j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
}

std::vector<PlotRecord> read_records(std::istream& in) {
  std::vector<PlotRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<PlotRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("record line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string record_id(std::string_view premise, std::uint64_t seed, std::string_view source) {
  std::string key(premise);
  key += '\n';
  key += std::to_string(seed);
  key += '\n';
  key += source;
  return text::hex_id(text::fnv1a(key));
}

PlotRecord make_record(const PlotRun& run, std::string_view source) {
  PlotRecord r;
  r.premise = run.doc.premise;
  r.id = record_id(r.premise, run.meta.seed, source);
  r.text = render_plot(run.doc);
  r.valid = run.meta.valid;
  r.violations = run.meta.violations;
  r.meta = {run.meta.model, run.meta.seed, run.meta.ledger.total_calls(), run.meta.started_at,
            run.meta.finished_at};
  r.source = std::string(source);
  return r;
}

PlotRecord error_record(std::uint64_t seed, std::string_view source, std::string_view model,
                        std::string_view what) {
  PlotRecord r;
  r.id = record_id("", seed, source);
  r.meta.model = std::string(model);
  r.meta.seed = seed;
  r.source = std::string(source);
  r.error = std::string(what);
  return r;
}

nlohmann::json to_json(const BatchSummary& s) {
  return {{"attempted", s.attempted},
          {"succeeded", s.succeeded},
          {"failed", s.failed},
          {"valid", s.valid},
          {"total_calls", s.total_calls}};
}

BatchSummary batch_generate(const LlmClient& client, const PipelineConfig& cfg, int n, int workers,
                            std::ostream& out, std::string_view source) {
  if (n < 1) throw PreconditionError("batch_generate: n must be >= 1");
  cfg.check();
  const std::int64_t calls_before = client.ledger().total_calls();

  BatchSummary summary;
  summary.attempted = n;
  std::mutex mu;  // guards everything below plus `out`
  std::map<int, PlotRecord> ready;
  int next_to_write = 0;
  std::exception_ptr sink_failure;
  std::atomic<int> next{0};
  std::atomic<bool> stop{false};

  auto work = [&] {
    while (!stop) {
      const int i = next++;
      if (i >= n) return;
      PipelineConfig run_cfg = cfg;
      run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(i);
      PlotRecord rec;
      try {
        rec = make_record(generate_plot(client, run_cfg), source);
      } catch (const Error& e) {
        rec = error_record(run_cfg.seed, source, client.model_name(), e.what());
      }
      std::lock_guard lock(mu);
      if (rec.error) {
        ++summary.failed;
      } else {
        ++summary.succeeded;
        if (rec.valid) ++summary.valid;
      }
      ready.emplace(i, std::move(rec));
      try {
        for (auto it = ready.find(next_to_write); it != ready.end(); it = ready.find(next_to_write)) {
          write_line(out, it->second);
          ready.erase(it);
          ++next_to_write;
        }
      } catch (const SinkError&) {
        if (!sink_failure) sink_failure = std::current_exception();
        stop = true;
        return;
      }
    }
  };

  const int w = std::clamp(workers, 1, n);
  std::vector<std::thread> threads;
  for (int t = 1; t < w; ++t) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (sink_failure) std::rethrow_exception(sink_failure);
  summary.total_calls = client.ledger().total_calls() - calls_before;
  return summary;
}

FilterResult filter_plots(const std::vector<PlotRecord>& records, const PipelineConfig& cfg) {
  FilterResult result;
  for (const auto& r : records) {
    PlotRecord copy = r;
    std::vector<Violation> violations;
    if (auto failure = revalidate(r, cfg, violations)) {
      ++result.report[*failure];
      copy.valid = false;
      result.dropped.push_back(std::move(copy));
      continue;
    }
    copy.valid = violations.empty();
    copy.violations = violations;
    if (copy.valid) {
      result.kept.push_back(std::move(copy));
      continue;
    }
    std::set<std::string> codes;
    for (const auto& v : violations) codes.insert(std::string(to_string(v.code)));
    for (const auto& c : codes) ++result.report[c];
    result.dropped.push_back(std::move(copy));
  }
  return result;
}

SftExportResult export_sft(const std::vector<PlotRecord>& records, std::ostream& out, const PipelineConfig& cfg) {
  SftExportResult result;
  for (const auto& r : records) {
    if (r.error) {
      result.skipped.push_back({r.id, "pipeline failed: " + *r.error});
      continue;
    }
    PlotDocument doc;
    try {
      doc = parse_plot(r.text);
    } catch (const ParseError& e) {
      result.skipped.push_back({r.id, std::string("unparseable: ") + e.what()});
      continue;
    }
    ValidationReport report = validate_structure(doc, cfg);
    if (!report.valid) {
      result.skipped.push_back({r.id, "invalid: " + std::string(to_string(report.violations.front().code))});
      continue;
    }
    SftPair p = split_sft(doc);
    write_line(out, {{"prompt", p.prompt}, {"response", p.response}});
    ++result.lines;
  }
  return result;
}

std::string pair_id(std::string_view premise, std::string_view source_a, std::string_view source_b) {
  std::string key(premise);
  key += '\n';
  key += source_a;
  key += '\n';
  key += source_b;
  return text::hex_id(text::fnv1a(key));
}

PairSummary make_pairs(const std::vector<std::string>& premises, const Generator& gen_a, const Generator& gen_b,
                       std::ostream& out, std::ostream* log) {
  if (premises.empty()) throw PreconditionError("make_pairs: no premises");
  PairSummary summary;
  std::set<std::string> seen;
  std::uint64_t index = 0;
  for (const auto& raw : premises) {
    const std::string premise = text::trim(raw);
    if (premise.empty()) continue;
    if (!seen.insert(premise).second) {
      ++summary.duplicates;
      if (log) *log << "warning: duplicate premise skipped: " << premise.substr(0, 80) << '\n';
      continue;
    }
    const std::uint64_t i = index++;
    PlanOptions opts;
    opts.fixed_premise = premise;
    try {
      PipelineConfig cfg_a = gen_a.cfg;
      cfg_a.seed += i;
      PipelineConfig cfg_b = gen_b.cfg;
      cfg_b.seed += i;
      PlotRun a = generate_plot(gen_a.client, cfg_a, opts);
      PlotRun b = generate_plot(gen_b.client, cfg_b, opts);
      PreferencePair pair{pair_id(premise, gen_a.source, gen_b.source), premise,
                          {gen_a.source, render_plot(a.doc)}, {gen_b.source, render_plot(b.doc)}};
      write_line(out, pair);
      ++summary.pairs;
    } catch (const SinkError&) {
      throw;
    } catch (const Error& e) {
      ++summary.failed;
      if (log) *log << "warning: pair for premise " << i << " failed: " << e.what() << '\n';
    }
  }
  return summary;
}

std::int64_t percent_rounded(std::int64_t count, std::int64_t total) {
  if (total <= 0) return 0;
  return (count * 200 + total) / (2 * total);
}

std::int64_t LabelTable::total(Question q) const {
  auto it = counts.find(q);
  if (it == counts.end()) return 0;
  std::int64_t sum = 0;
  for (auto c : it->second) sum += c;
  return sum;
}

std::int64_t LabelTable::percent(Question q, Choice c) const {
  auto it = counts.find(q);
  if (it == counts.end()) return 0;
  return percent_rounded(it->second[static_cast<std::size_t>(c)], total(q));
}

LabelTable corpus_stats(const std::vector<ChoiceSet>& annotations) {
  LabelTable table;
  for (Question q : kChoiceQuestions) table.counts[q] = {0, 0, 0, 0};
  for (const auto& a : annotations) {
    for (const auto& [q, c] : a) {
      auto it = table.counts.find(q);
      if (it != table.counts.end()) ++it->second[static_cast<std::size_t>(c)];
    }
  }
  return table;
}

std::string format_label_table(const LabelTable& table) {
  std::ostringstream os;
  os << "Question  Plot A  Plot B  Both  Neither  (n)\n";
  for (Question q : kChoiceQuestions) {
    os << to_string(q);
    const int widths[] = {8, 8, 6, 9};
    for (std::size_t k = 0; k < 4; ++k) {
      std::string cell = std::to_string(table.percent(q, kAllChoices[k])) + "%";
      os << std::string(static_cast<std::size_t>(widths[k]) - cell.size(), ' ') << cell;
    }
    os << "  (" << table.total(q) << ")\n";
  }
  return os.str();
}

nlohmann::json label_table_to_json(const LabelTable& table) {
  nlohmann::json out = nlohmann::json::object();
  for (Question q : kChoiceQuestions) {
    nlohmann::json row;
    row["total"] = table.total(q);
    for (Choice c : kAllChoices) {
      const auto count = table.counts.count(q) ? table.counts.at(q)[static_cast<std::size_t>(c)] : 0;
      row["counts"][std::string(to_string(c))] = count;
      row["percent"][std::string(to_string(c))] = table.percent(q, c);
    }
    out[std::string(to_string(q))] = row;
  }
  return out;
}

Split shuffle_split(std::vector<PlotRecord> records, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) throw PreconditionError("shuffle_split: fraction must be in [0, 1]");
  std::mt19937_64 rng(seed);
  // Fisher-Yates driven directly by rng.
  for (std::size_t i = records.size(); i > 1; --i) {
    std::swap(records[i - 1], records[rng() % i]);
  }
  const auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(records.size())));
  Split s;
  s.first.assign(std::make_move_iterator(records.begin()), std::make_move_iterator(records.begin() + cut));
  s.second.assign(std::make_move_iterator(records.begin() + cut), std::make_move_iterator(records.end()));
  return s;
}

}  // namespace plotkit
