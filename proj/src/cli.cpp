#include "plotkit/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "plotkit/annotation.hpp"
#include "plotkit/annotation_server.hpp"
#include "plotkit/dataset.hpp"
#include "plotkit/http_backend.hpp"
#include "plotkit/judge.hpp"
#include "plotkit/planner.hpp"
#include "plotkit/prompts.hpp"
#include "plotkit/scripted_backend.hpp"
#include "plotkit/text.hpp"

namespace plotkit::cli {
namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct KeySpec {
  const char* key;
  const char* fallback;
  const char* help;
};

// The documented flat key set.
constexpr KeySpec kKeys[] = {
    {"backend", "scripted", "scripted | http | replay"},
    {"rules", "", "scripted rules JSON, or request log JSONL for replay"},
    {"base_url", "http://localhost:8000/v1", "chat-completions endpoint root"},
    {"api_key_env", "OPENAI_API_KEY", "environment variable holding the API key"},
    {"model", "gpt-4", "model name sent to the endpoint"},
    {"requests_per_minute", "60", "client-side rate limit"},
    {"max_retries", "3", "retries on transient transport errors"},
    {"retry_backoff_ms", "1000", "first retry delay, doubled per retry"},
    {"sequential_candidates", "false", "request candidates one call at a time"},
    {"timeout_seconds", "120", "HTTP timeout"},
    {"log", "", "append every request/response to this JSONL file"},
    {"seed", "0", "base seed"},
    {"char_min", "3", "minimum characters"},
    {"char_max", "6", "maximum characters"},
    {"max_top_points", "4", "maximum top-level outline points"},
    {"sub_min", "3", "minimum sub-points per top point"},
    {"sub_max", "4", "maximum sub-points per top point"},
    {"candidates", "4", "candidates per step (k)"},
    {"max_step_retries", "2", "retries per step"},
    {"annotate_scenes", "true", "add scene and character annotations"},
    {"creative_temperature", "0.9", "temperature for creative stages"},
    {"structural_temperature", "0.3", "temperature for names and annotations"},
    {"max_tokens", "256", "max tokens per generation call"},
    {"judge_temperature", "0", "judge sampling temperature"},
    {"judge_max_tokens", "1024", "judge max tokens"},
    {"workers", "1", "parallel workers for batch and judge"},
    {"source", "plotkit", "generator tag recorded on plots and pairs"},
};

bool known_key(const std::string& k) {
  return std::any_of(std::begin(kKeys), std::end(kKeys), [&](const KeySpec& s) { return k == s.key; });
}

std::string env_name(const std::string& key) {
  std::string out = "PLOTKIT_";
  for (char c : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string flag_name(const std::string& key) {
  std::string out = "--";
  for (char c : key) out += c == '_' ? '-' : c;
  return out;
}

long long get_int(const Settings& s, const std::string& key) {
  const std::string& v = s.at(key);
  try {
    std::size_t used = 0;
    long long out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw UsageError("config key " + key + ": expected an integer, got '" + v + "'");
  }
}

double get_double(const Settings& s, const std::string& key) {
  const std::string& v = s.at(key);
  try {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw UsageError("config key " + key + ": expected a number, got '" + v + "'");
  }
}

bool get_bool(const Settings& s, const std::string& key) {
  std::string v = s.at(key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("config key " + key + ": expected a boolean, got '" + s.at(key) + "'");
}

PipelineConfig pipeline_config(const Settings& s) {
  PipelineConfig cfg;
  cfg.char_range = {static_cast<int>(get_int(s, "char_min")), static_cast<int>(get_int(s, "char_max"))};
  cfg.max_top_points = static_cast<int>(get_int(s, "max_top_points"));
  cfg.sub_range = {static_cast<int>(get_int(s, "sub_min")), static_cast<int>(get_int(s, "sub_max"))};
  cfg.candidates_per_step = static_cast<int>(get_int(s, "candidates"));
  cfg.max_step_retries = static_cast<int>(get_int(s, "max_step_retries"));
  cfg.annotate_scenes = get_bool(s, "annotate_scenes");
  cfg.seed = static_cast<std::uint64_t>(get_int(s, "seed"));
  cfg.creative_temperature = get_double(s, "creative_temperature");
  cfg.structural_temperature = get_double(s, "structural_temperature");
  cfg.max_tokens = static_cast<int>(get_int(s, "max_tokens"));
  try {
    cfg.check();
  } catch (const PreconditionError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

BackendConfig backend_config(const Settings& s) {
  BackendConfig cfg;
  cfg.base_url = s.at("base_url");
  cfg.api_key_env = s.at("api_key_env");
  cfg.model_name = s.at("model");
  cfg.requests_per_minute = static_cast<int>(get_int(s, "requests_per_minute"));
  cfg.max_retries = static_cast<int>(get_int(s, "max_retries"));
  cfg.retry_backoff = Clock::duration{get_int(s, "retry_backoff_ms")};
  cfg.sequential_candidates = get_bool(s, "sequential_candidates");
  cfg.timeout_seconds = get_double(s, "timeout_seconds");
  try {
    cfg.check();
  } catch (const PreconditionError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

nlohmann::json effective_json(const Settings& s) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : s) j[k] = v;
  const char* key = std::getenv(s.at("api_key_env").c_str());
  j["api_key"] = key && *key ? "<redacted>" : "<unset>";
  return j;
}

// Streams for "-" or a path; owns opened files.
class Io {
 public:
  Io(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

  std::istream& input(const std::string& path) {
    if (path == "-") return in_;
    auto f = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*f) throw UsageError("cannot open " + path);
    inputs_.push_back(std::move(f));
    return *inputs_.back();
  }

  std::ostream& output(const std::string& path) {
    if (path == "-") return out_;
    auto f = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*f) throw SinkError("cannot write " + path);
    outputs_.push_back(std::move(f));
    return *outputs_.back();
  }

 private:
  std::istream& in_;
  std::ostream& out_;
  std::vector<std::unique_ptr<std::ifstream>> inputs_;
  std::vector<std::unique_ptr<std::ofstream>> outputs_;
};

struct ClientHolder {
  std::optional<LlmClient> client;
  std::unique_ptr<std::ofstream> log_file;
};

void make_client(const Settings& s, ClientHolder& holder) {
  BackendConfig bcfg = backend_config(s);
  const std::string& kind = s.at("backend");
  std::shared_ptr<ChatBackend> backend;
  std::shared_ptr<Clock> clock;
  if (kind == "scripted" || kind == "replay") {
    if (s.at("rules").empty()) throw UsageError(kind + " backend needs --rules");
    if (kind == "scripted") {
      backend = load_scripted_backend(s.at("rules"));
    } else {
      std::ifstream log(s.at("rules"), std::ios::binary);
      if (!log) throw UsageError("cannot open " + s.at("rules"));
      backend = replay_backend_from_log(log);
    }
    clock = std::make_shared<FakeClock>();
  } else if (kind == "http") {
    backend = std::make_shared<HttpChatBackend>(bcfg);
    clock = std::make_shared<SystemClock>();
  } else {
    throw UsageError("unknown backend '" + kind + "'");
  }
  holder.client.emplace(std::move(backend), bcfg, std::move(clock));
  if (!s.at("log").empty()) {
    holder.log_file = std::make_unique<std::ofstream>(s.at("log"), std::ios::binary | std::ios::app);
    if (!*holder.log_file) throw SinkError("cannot open log " + s.at("log"));
    holder.client->set_log(std::make_shared<JsonlWriter>(*holder.log_file));
  }
}

std::vector<std::string> read_premises(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = text::trim(line);
    if (t.empty()) continue;
    if (t.front() == '{') {
      auto j = nlohmann::json::parse(t);
      out.push_back(j.at("premise").get<std::string>());
    } else {
      out.push_back(t);
    }
  }
  return out;
}

std::vector<ComparisonRecord> read_comparisons(std::istream& in) {
  std::vector<ComparisonRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<ComparisonRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("comparison line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<AnnotationResponse> read_annotations(std::istream& in) {
  std::vector<AnnotationResponse> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<AnnotationResponse>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("annotation line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

int exit_code_for(const std::exception_ptr& ep, std::ostream& err) {
  try {
    std::rethrow_exception(ep);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const TransportError& e) {
    err << "transport error: " << e.what() << '\n';
    return kTransport;
  } catch (const AuthError& e) {
    err << "auth error: " << e.what() << '\n';
    return kTransport;
  } catch (const UnmatchedPromptError& e) {
    err << "backend error: " << e.what() << '\n';
    return kTransport;
  } catch (const SinkError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kInternal;
  } catch (const Error& e) {
    err << "invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "invalid json: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace

Settings default_settings() {
  Settings s;
  for (const auto& k : kKeys) s[k.key] = k.fallback;
  return s;
}

Settings merge_config_file(Settings base, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open config " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config " + path + " must be a flat JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!known_key(k)) throw UsageError("config " + path + ": unknown key '" + k + "'");
    if (v.is_object() || v.is_array()) throw UsageError("config " + path + ": key '" + k + "' must be scalar");
    base[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  return base;
}

Settings merge_environment(Settings base) {
  for (const auto& k : kKeys) {
    if (const char* v = std::getenv(env_name(k.key).c_str())) base[k.key] = v;
  }
  return base;
}

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Story-plot generation, corpus tooling, annotation and pairwise judging", "plotkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  bool dry_run = false;
  app.add_option("--config", config_path, "flat JSON config file");
  app.add_flag("--dry-run", dry_run, "print the effective config and exit");
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option*> flag_opts;
  for (const auto& k : kKeys) {
    flag_opts[k.key] = app.add_option(flag_name(k.key), flag_values[k.key], k.help);
  }

  // generate
  auto* gen = app.add_subcommand("generate", "generate one plot");
  std::string premise;
  bool as_jsonl = false;
  gen->add_option("--premise", premise, "use this premise instead of generating one");
  gen->add_flag("--jsonl", as_jsonl, "print a plot record line instead of text");

  // batch
  auto* batch = app.add_subcommand("batch", "generate many plots as JSONL records");
  int batch_n = 0;
  std::string batch_out = "-";
  batch->add_option("--n", batch_n, "number of plots")->required();
  batch->add_option("--out", batch_out, "output JSONL");

  // filter
  auto* filter = app.add_subcommand("filter", "split records into structurally valid and invalid");
  std::string filter_in = "-", kept_out = "-", dropped_out;
  filter->add_option("--in", filter_in, "input records");
  filter->add_option("--out-kept", kept_out, "kept records");
  filter->add_option("--out-dropped", dropped_out, "dropped records");

  // export-sft
  auto* sft = app.add_subcommand("export-sft", "write {prompt, response} lines for valid records");
  std::string sft_in = "-", sft_out = "-";
  sft->add_option("--in", sft_in, "input records");
  sft->add_option("--out", sft_out, "output JSONL");

  // make-pairs
  auto* pairs = app.add_subcommand("make-pairs", "generate same-premise plot pairs");
  std::string premises_path, gen_a_path, gen_b_path, pairs_out = "-";
  pairs->add_option("--premises", premises_path, "premises, one per line or JSONL with 'premise'")->required();
  pairs->add_option("--gen-a", gen_a_path, "flat config overriding the effective config for plot A")->required();
  pairs->add_option("--gen-b", gen_b_path, "flat config overriding the effective config for plot B")->required();
  pairs->add_option("--out", pairs_out, "output JSONL");

  // judge
  auto* judge = app.add_subcommand("judge", "pairwise LLM judging");
  std::string judge_pairs_path, aspect_name = "OVERALL", judge_out = "-";
  bool no_shuffle = false;
  judge->add_option("--pairs", judge_pairs_path, "pairs JSONL")->required();
  judge->add_option("--aspect", aspect_name, "OVERALL, Q1, Q3, Q4, Q5 or Q6");
  judge->add_option("--out", judge_out, "comparison records JSONL");
  judge->add_flag("--no-shuffle", no_shuffle, "always present plot_a first");

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "win rates from comparison records");
  std::string agg_in = "-", agg_aspect;
  agg->add_option("--in", agg_in, "comparison records JSONL");
  agg->add_option("--aspect", agg_aspect, "restrict to one aspect");

  // stats
  auto* stats = app.add_subcommand("stats", "label distribution of annotations");
  std::string annotations_path = "-";
  stats->add_option("--annotations", annotations_path, "annotation store JSONL");

  // serve
  auto* serve = app.add_subcommand("serve", "host the annotation service");
  std::string serve_pairs, serve_store, serve_host = "127.0.0.1", serve_static;
  int serve_port = 8080;
  serve->add_option("--pairs", serve_pairs, "pairs JSONL")->required();
  serve->add_option("--store", serve_store, "append-only annotation log")->required();
  serve->add_option("--host", serve_host, "bind address");
  serve->add_option("--port", serve_port, "port (0 picks one)");
  serve->add_option("--static", serve_static, "UI bundle directory served under /");

  // dump-prompt
  auto* dump = app.add_subcommand("dump-prompt", "print a prompt template on fixture inputs");
  std::string dump_name;
  bool dump_list = false;
  dump->add_option("--name", dump_name, "template name");
  dump->add_flag("--list", dump_list, "list template names");

  try {
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    Settings settings = default_settings();
    if (!config_path.empty()) settings = merge_config_file(std::move(settings), config_path);
    settings = merge_environment(std::move(settings));
    for (const auto& [k, opt] : flag_opts) {
      if (opt->count()) settings[k] = flag_values[k];
    }
    // Validate eagerly so a bad value is a usage error on every path.
    pipeline_config(settings);
    backend_config(settings);

    if (dry_run) {
      out << effective_json(settings).dump(2) << '\n';
      return kOk;
    }

    Io io(in, out);
    const PipelineConfig pcfg = pipeline_config(settings);
    const int workers = static_cast<int>(get_int(settings, "workers"));
    const std::string source = settings.at("source");

    if (*dump) {
      if (dump_list) {
        for (const auto& n : prompts::template_names()) out << n << '\n';
        return kOk;
      }
      if (dump_name.empty()) throw UsageError("dump-prompt needs --name or --list");
      try {
        out << prompts::dump(dump_name) << '\n';
      } catch (const PreconditionError& e) {
        throw UsageError(e.what());
      }
      return kOk;
    }

    if (*gen) {
      ClientHolder holder;
      make_client(settings, holder);
      PlanOptions opts;
      if (!premise.empty()) opts.fixed_premise = premise;
      PlotRun run = generate_plot(*holder.client, pcfg, opts);
      if (as_jsonl) {
        out << nlohmann::json(make_record(run, source)).dump() << '\n';
      } else {
        out << render_plot(run.doc) << "---\n" << nlohmann::json(run.meta).dump() << '\n';
      }
      return kOk;
    }

    if (*batch) {
      ClientHolder holder;
      make_client(settings, holder);
      if (batch_n < 1) throw UsageError("--n must be >= 1");
      BatchSummary s = batch_generate(*holder.client, pcfg, batch_n, workers, io.output(batch_out), source);
      err << to_json(s).dump() << '\n';
      return kOk;
    }

    if (*filter) {
      auto records = read_records(io.input(filter_in));
      FilterResult r = filter_plots(records, pcfg);
      std::ostream& kept = io.output(kept_out);
      for (const auto& rec : r.kept) kept << nlohmann::json(rec).dump() << '\n';
      if (!dropped_out.empty()) {
        std::ostream& dropped = io.output(dropped_out);
        for (const auto& rec : r.dropped) dropped << nlohmann::json(rec).dump() << '\n';
      }
      nlohmann::json report = {{"input", records.size()},
                               {"kept", r.kept.size()},
                               {"dropped", r.dropped.size()},
                               {"report", r.report}};
      (kept_out == "-" || dropped_out == "-" ? err : out) << report.dump() << '\n';
      return kOk;
    }

    if (*sft) {
      auto records = read_records(io.input(sft_in));
      SftExportResult r = export_sft(records, io.output(sft_out), pcfg);
      for (const auto& s : r.skipped) err << "skipped " << s.id << ": " << s.reason << '\n';
      err << nlohmann::json{{"lines", r.lines}, {"skipped", r.skipped.size()}}.dump() << '\n';
      return kOk;
    }

    if (*pairs) {
      auto premises = read_premises(io.input(premises_path));
      std::vector<std::unique_ptr<ClientHolder>> holders;
      auto make_gen = [&](const std::string& path, const char* default_tag) {
        Settings base = settings;
        base["source"] = default_tag;
        Settings s = merge_config_file(std::move(base), path);
        holders.push_back(std::make_unique<ClientHolder>());
        make_client(s, *holders.back());
        return Generator{*holders.back()->client, pipeline_config(s), s.at("source")};
      };
      Generator a = make_gen(gen_a_path, "a");
      Generator b = make_gen(gen_b_path, "b");
      if (a.source == b.source) throw UsageError("generators need distinct source tags");
      PairSummary s = make_pairs(premises, a, b, io.output(pairs_out), &err);
      err << nlohmann::json{{"pairs", s.pairs}, {"failed", s.failed}, {"duplicates", s.duplicates}}.dump()
          << '\n';
      return kOk;
    }

    if (*judge) {
      auto aspect = aspect_from_string(aspect_name);
      if (!aspect) throw UsageError("unknown aspect '" + aspect_name + "'");
      auto pair_list = read_pairs(io.input(judge_pairs_path));
      ClientHolder holder;
      make_client(settings, holder);
      JudgeOptions opts;
      opts.temperature = get_double(settings, "judge_temperature");
      opts.max_tokens = static_cast<int>(get_int(settings, "judge_max_tokens"));
      opts.shuffle = !no_shuffle;
      auto records = judge_pairs(*holder.client, pair_list, *aspect, pcfg.seed, workers, opts);
      std::ostream& o = io.output(judge_out);
      for (const auto& r : records) o << nlohmann::json(r).dump() << '\n';
      return kOk;
    }

    if (*agg) {
      std::optional<Aspect> only;
      if (!agg_aspect.empty()) {
        only = aspect_from_string(agg_aspect);
        if (!only) throw UsageError("unknown aspect '" + agg_aspect + "'");
      }
      auto rows = aggregate_winrates(read_comparisons(io.input(agg_in)), only);
      out << format_winrate_table(rows) << '\n' << winrates_to_json(rows).dump() << '\n';
      return kOk;
    }

    if (*stats) {
      std::vector<ChoiceSet> sets;
      for (const auto& a : read_annotations(io.input(annotations_path))) sets.push_back(a.choices);
      LabelTable table = corpus_stats(sets);
      out << format_label_table(table) << '\n' << label_table_to_json(table).dump() << '\n';
      return kOk;
    }

    if (*serve) {
      auto pair_list = read_pairs(io.input(serve_pairs));
      auto store = std::make_shared<AnnotationStore>(serve_store);
      auto service = std::make_shared<AnnotationService>(std::move(pair_list), store);
      ServerOptions opts;
      opts.host = serve_host;
      opts.port = serve_port;
      if (!serve_static.empty()) opts.static_dir = serve_static;
      AnnotationServer server(service, opts);
      const int port = server.bind();
      err << "serving " << service->pair_count() << " pairs on http://" << serve_host << ":" << port << '\n';
      server.listen();
      return kOk;
    }
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
  return kUsage;
}

}  // namespace plotkit::cli
