#include "plotkit/planner.hpp"

#include <algorithm>
#include <cctype>

#include "plotkit/errors.hpp"
#include "plotkit/text.hpp"

namespace plotkit {
namespace {

using Normalizer = std::function<std::optional<std::string>(std::string_view)>;
using StopCheck = std::function<bool(const std::vector<std::string>&)>;

struct StepSpec {
  Stage stage;
  std::string label;
  std::string prompt;
  double temperature;
  std::vector<std::string> existing;
  SentenceBounds bounds;
  Normalizer normalize;
  StopCheck stop;  // optional: true ends the loop without a choice
};

constexpr std::string_view kSettingStem = "The story is set in";

std::string strip_prefix_ci(std::string s, std::string_view prefix) {
  if (text::starts_with_ci(s, prefix)) s = text::trim(std::string_view(s).substr(prefix.size()));
  return s;
}

// First paragraph after leading blank lines.
std::string first_paragraph(std::string_view raw) {
  std::string t = text::trim(raw);
  auto cut = t.find("\n\n");
  if (cut == std::string::npos) cut = t.find("\r\n\r\n");
  return cut == std::string::npos ? t : text::trim(std::string_view(t).substr(0, cut));
}

std::string first_line(std::string_view raw) {
  for (const auto& line : text::split_lines(raw)) {
    std::string t = text::trim(line);
    if (!t.empty()) return t;
  }
  return {};
}

// Removes a leading outline label ("3.", "2b.", "c.") and reports whether one
// was present.
std::string strip_label(std::string_view line, bool* had_label = nullptr) {
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  const std::size_t digits = i;
  if (i < line.size() && std::islower(static_cast<unsigned char>(line[i]))) ++i;
  const bool labeled = i > 0 && i - digits <= 1 && i < line.size() && line[i] == '.' &&
                       (i + 1 == line.size() || std::isspace(static_cast<unsigned char>(line[i + 1])));
  if (had_label) *had_label = labeled;
  if (!labeled) return std::string(line);
  return text::trim(line.substr(i + 1));
}

std::string clean_point(std::string_view line) {
  return text::flatten(split_annotations(strip_label(text::trim(line))).text);
}

bool all_end_markers(const std::vector<std::string>& raw) {
  bool any = false;
  for (const auto& c : raw) {
    std::string t = text::trim(c);
    if (t.empty()) continue;
    if (!is_end_marker(t)) return false;
    any = true;
  }
  return any;
}

// One pipeline step with rejection sampling and retries. Returns nullopt only
// when spec.stop fires.
std::optional<std::string> run_step(PlanState& st, const StepSpec& spec) {
  GenerationRequest req;
  req.user = spec.prompt;
  req.temperature = spec.temperature;
  req.max_tokens = st.cfg.max_tokens;
  req.n_candidates = st.cfg.candidates_per_step;

  for (int attempt = 0; attempt <= st.cfg.max_step_retries; ++attempt) {
    GenerationResult res = st.client.chat_generate(req, spec.stage, &st.ledger);
    if (spec.stop && spec.stop(res.candidates)) {
      ++st.wasted_attempts;
      return std::nullopt;
    }
    std::vector<std::string> normalized;
    normalized.reserve(res.candidates.size());
    for (const auto& raw : res.candidates) normalized.push_back(spec.normalize(raw).value_or(""));
    Selection sel = select_candidate(normalized, spec.existing, spec.bounds, st.scorer, spec.stage);
    if (sel.index) {
      st.outcomes.push_back({spec.stage, spec.label, normalized[*sel.index], std::move(normalized),
                             sel.reason, attempt});
      return st.outcomes.back().chosen;
    }
    ++st.wasted_attempts;
  }
  throw StepFailed(spec.label, "no usable candidate after " + std::to_string(st.cfg.max_step_retries + 1) +
                                   " attempts");
}

std::string run_required_step(PlanState& st, const StepSpec& spec) {
  auto chosen = run_step(st, spec);
  if (!chosen) throw StepFailed(spec.label, "stopped without a candidate");
  return *chosen;
}

}  // namespace

std::string_view to_string(SelectionReason r) {
  switch (r) {
    case SelectionReason::VALID_PARSE: return "VALID_PARSE";
    case SelectionReason::LENGTH_HEURISTIC: return "LENGTH_HEURISTIC";
    case SelectionReason::ONLY_CANDIDATE: return "ONLY_CANDIDATE";
  }
  return "ONLY_CANDIDATE";
}

void to_json(nlohmann::json& j, const StepOutcome& o) {
  j = nlohmann::json{{"stage", to_string(o.stage)},
                     {"label", o.label},
                     {"chosen", o.chosen},
                     {"candidates", o.candidates},
                     {"selection_reason", to_string(o.selection_reason)},
                     {"retries_used", o.retries_used}};
}

Selection select_candidate(const std::vector<std::string>& candidates,
                           const std::vector<std::string>& existing, SentenceBounds bounds,
                           const CandidateScorer& scorer, Stage stage) {
  std::vector<std::size_t> viable;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::string c = text::trim(candidates[i]);
    if (c.empty()) continue;
    auto dup_of = [&](const std::string& other) { return text::near_duplicate(c, other); };
    if (std::any_of(existing.begin(), existing.end(), dup_of)) continue;
    if (std::any_of(viable.begin(), viable.end(), [&](std::size_t j) { return dup_of(candidates[j]); })) {
      continue;
    }
    viable.push_back(i);
  }
  if (viable.empty()) return {};
  if (viable.size() == 1) return {viable.front(), SelectionReason::ONLY_CANDIDATE};

  std::vector<std::size_t> in_bounds;
  for (std::size_t i : viable) {
    if (bounds.contains(text::sentence_count(candidates[i]))) in_bounds.push_back(i);
  }
  if (in_bounds.size() == 1) return {in_bounds.front(), SelectionReason::VALID_PARSE};

  const auto& pool = in_bounds.empty() ? viable : in_bounds;
  std::size_t best = pool.front();
  double best_score = 0;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    const std::size_t i = pool[k];
    const double score = scorer ? scorer(stage, candidates[i])
                                : static_cast<double>(text::trim(candidates[i]).size());
    if (k == 0 || score > best_score) {
      best = i;
      best_score = score;
    }
  }
  return {best, SelectionReason::LENGTH_HEURISTIC};
}

bool is_end_marker(std::string_view candidate) {
  const std::string n = text::normalize(candidate);
  if (n == "the end") return true;
  auto words = text::split_words(n);
  return !words.empty() && words.front() == "end";
}

std::optional<std::string> normalize_premise(std::string_view raw) {
  std::string s = text::flatten(first_paragraph(raw));
  s = strip_prefix_ci(std::move(s), "Premise:");
  if (s.empty()) return std::nullopt;
  return s;
}

std::optional<std::string> normalize_setting(std::string_view raw) {
  std::string s = text::flatten(first_paragraph(raw));
  s = strip_prefix_ci(std::move(s), "Settings:");
  s = strip_prefix_ci(std::move(s), "Setting:");
  if (s.empty()) return std::nullopt;
  if (text::starts_with_ci(s, kSettingStem)) return s;
  return std::string(kSettingStem) + " " + s;
}

std::optional<std::string> normalize_name(std::string_view raw) {
  std::string s = strip_prefix_ci(first_line(raw), "Full Name:");
  while (!s.empty() && s.back() == '.') s.pop_back();
  s = text::trim(s);
  if (s.empty() || s.find(':') != std::string::npos || s.find(',') != std::string::npos) return std::nullopt;
  if (text::word_count(s) > 6) return std::nullopt;
  return s;
}

std::optional<std::string> normalize_portrait(std::string_view raw, std::string_view name) {
  std::string s = first_paragraph(raw);
  if (auto cut = s.find("Full Name:"); cut != std::string::npos) s = s.substr(0, cut);
  s = text::flatten(s);
  s = strip_prefix_ci(std::move(s), "Character Portrait:");
  s = strip_prefix_ci(std::move(s), std::string(name) + " is");
  if (s.empty()) return std::nullopt;
  return std::string(name) + " is " + s;
}

std::optional<std::string> normalize_top_point(std::string_view raw) {
  std::string s = clean_point(first_line(raw));
  if (s.empty() || is_end_marker(s)) return std::nullopt;
  return s;
}

std::vector<std::string> split_sub_points(std::string_view raw) {
  std::vector<std::string> out;
  bool first = true;
  for (const auto& line : text::split_lines(raw)) {
    const std::string t = text::trim(line);
    if (t.empty()) continue;
    bool labeled = false;
    strip_label(t, &labeled);
    const bool take = first || labeled;
    first = false;
    if (!take) continue;
    std::string p = clean_point(t);
    if (!p.empty() && !is_end_marker(p)) out.push_back(std::move(p));
    if (out.size() == 2) break;
  }
  return out;
}

PlanState::PlanState(LlmClient c, PipelineConfig config)
    : client(std::move(c)), cfg(std::move(config)), rng(cfg.seed) {}

int PlanState::draw(IntRange range) {
  const auto span = static_cast<std::uint64_t>(range.max - range.min + 1);
  return range.min + static_cast<int>(rng() % span);
}

std::string generate_premise(PlanState& st) {
  return run_required_step(st, {Stage::premise, "premise", prompts::premise_prompt(), st.cfg.creative_temperature,
                                {}, {1, 3}, normalize_premise, {}});
}

std::string generate_setting(PlanState& st, std::string_view premise) {
  return run_required_step(st, {Stage::setting, "setting", prompts::setting_prompt(premise),
                                st.cfg.creative_temperature, {}, {1, 3}, normalize_setting, {}});
}

std::vector<Character> generate_characters(PlanState& st, std::string_view premise, std::string_view setting) {
  const int count = st.draw(st.cfg.char_range);
  prompts::CharacterContext ctx{std::string(premise), std::string(setting), {}};
  for (int k = 1; k <= count; ++k) {
    std::vector<std::string> names;
    for (const auto& c : ctx.previous) names.push_back(c.full_name);
    const std::string tag = "character " + std::to_string(k);
    std::string name = run_required_step(st, {Stage::character_name, tag + " name",
                                              prompts::character_name_prompt(ctx, k),
                                              st.cfg.structural_temperature, names, {1, 1}, normalize_name, {}});
    std::string portrait = run_required_step(
        st, {Stage::character_portrait, tag + " portrait", prompts::character_portrait_prompt(ctx, k, name),
             st.cfg.creative_temperature, {}, {1, 1},
             [&name](std::string_view raw) { return normalize_portrait(raw, name); }, {}});
    ctx.previous.push_back({std::move(name), std::move(portrait)});
  }
  return ctx.previous;
}

std::vector<std::string> generate_top_outline(PlanState& st, const prompts::OutlineContext& base) {
  prompts::OutlineContext ctx = base;
  ctx.current_top_index = 0;
  ctx.existing_top_points.clear();
  ctx.top_point_limit = st.cfg.max_top_points;
  std::vector<std::string>& points = ctx.existing_top_points;
  while (static_cast<int>(points.size()) < st.cfg.max_top_points) {
    StepSpec spec{Stage::top_outline, std::to_string(points.size() + 1), prompts::top_outline_prompt(ctx),
                  st.cfg.creative_temperature, points, {1, 3}, normalize_top_point, {}};
    if (!points.empty()) spec.stop = all_end_markers;
    auto chosen = run_step(st, spec);
    if (!chosen) break;
    points.push_back(std::move(*chosen));
  }
  return points;
}

std::vector<std::string> expand_point(PlanState& st, const prompts::OutlineContext& base, int target) {
  prompts::OutlineContext ctx = base;
  ctx.sub_point_limit = std::max(ctx.sub_point_limit, st.cfg.sub_range.max);
  const bool final_point = static_cast<std::size_t>(ctx.current_top_index) == ctx.existing_top_points.size();
  std::vector<std::string> subs = ctx.existing_sub_points_under_current;

  while (static_cast<int>(subs.size()) < target) {
    ctx.existing_sub_points_under_current = subs;
    const std::string prefix = prompts::sub_outline_prefix(ctx);
    const std::string prompt =
        final_point ? prefix : prompts::completion_wrapper(prefix, prompts::sub_outline_suffix(ctx));

    std::vector<std::string> existing = ctx.existing_top_points;
    for (const auto& earlier : ctx.earlier_sub_points) existing.insert(existing.end(), earlier.begin(), earlier.end());
    existing.insert(existing.end(), subs.begin(), subs.end());

    auto normalize = [&existing](std::string_view raw) -> std::optional<std::string> {
      std::vector<std::string> kept;
      for (auto& p : split_sub_points(raw)) {
        auto dup = [&p](const std::string& e) { return text::near_duplicate(p, e); };
        if (std::any_of(existing.begin(), existing.end(), dup) || std::any_of(kept.begin(), kept.end(), dup)) {
          continue;
        }
        kept.push_back(std::move(p));
      }
      if (kept.empty()) return std::nullopt;
      return text::join(kept, "\n");
    };

    const std::string label = std::to_string(ctx.current_top_index) + prompts::sub_letter(subs.size());
    std::string chosen = run_required_step(
        st, {Stage::sub_outline, label, prompt, st.cfg.creative_temperature, existing, {1, 6}, normalize, {}});
    ++st.sub_steps;
    for (auto& p : text::split_lines(chosen)) {
      if (static_cast<int>(subs.size()) < target) subs.push_back(std::move(p));
    }
  }
  return subs;
}

ItemAnnotations parse_annotation_reply(std::string_view reply, const std::vector<Character>& cast) {
  std::string line;
  for (const auto& l : text::split_lines(reply)) {
    if (l.find("Scene:") != std::string::npos || l.find("Characters:") != std::string::npos) {
      line = l;
      break;
    }
  }
  ItemAnnotations ann = split_annotations(text::flatten(line));
  std::vector<std::string> known;
  for (const auto& name : ann.characters) {
    const std::string n = text::normalize(name);
    for (const auto& c : cast) {
      if (text::normalize(c.full_name) == n &&
          std::find(known.begin(), known.end(), c.full_name) == known.end()) {
        known.push_back(c.full_name);
      }
    }
  }
  ann.characters = std::move(known);
  ann.text.clear();
  return ann;
}

void annotate_items(PlanState& st, PlotDocument& doc) {
  if (!st.cfg.annotate_scenes) return;
  prompts::OutlineContext ctx;
  ctx.premise = doc.premise;
  ctx.setting = doc.setting;
  ctx.characters_block = prompts::characters_block(doc.characters);
  for (const auto& top : doc.outline) ctx.existing_top_points.push_back(top.text);

  auto annotate = [&](OutlineSection& item) {
    GenerationRequest req;
    req.user = prompts::scene_annotation_prompt(ctx, item.text);
    req.temperature = st.cfg.structural_temperature;
    req.max_tokens = st.cfg.max_tokens;
    ++st.annotation_calls;
    try {
      GenerationResult res = st.client.chat_generate(req, Stage::annotation, &st.ledger);
      ItemAnnotations ann = parse_annotation_reply(res.candidates.front(), doc.characters);
      item.scene = std::move(ann.scene);
      item.mentioned_characters = std::move(ann.characters);
    } catch (const Error&) {
      item.scene.reset();
      item.mentioned_characters.clear();
    }
  };
  for (auto& top : doc.outline) {
    annotate(top);
    for (auto& sub : top.children) annotate(sub);
  }
}

std::int64_t RunMeta::expected_calls() const {
  return static_cast<std::int64_t>(candidates_per_call_factor) *
             (premise_steps + 1 + 2 * characters + top_points + sub_steps + wasted_attempts) +
         annotation_calls;
}

void to_json(nlohmann::json& j, const RunMeta& m) {
  j = nlohmann::json{{"model", m.model},
                     {"seed", m.seed},
                     {"ledger", m.ledger.to_json()},
                     {"total_calls", m.ledger.total_calls()},
                     {"expected_calls", m.expected_calls()},
                     {"valid", m.valid},
                     {"violations", m.violations},
                     {"counts",
                      {{"candidates_per_call_factor", m.candidates_per_call_factor},
                       {"premise_steps", m.premise_steps},
                       {"characters", m.characters},
                       {"top_points", m.top_points},
                       {"sub_points", m.sub_points},
                       {"sub_steps", m.sub_steps},
                       {"wasted_attempts", m.wasted_attempts},
                       {"annotation_calls", m.annotation_calls}}},
                     {"outcomes", m.outcomes},
                     {"started_at", m.started_at},
                     {"finished_at", m.finished_at}};
}

PlotRun generate_plot(const LlmClient& client, const PipelineConfig& cfg, const PlanOptions& opts) {
  cfg.check();
  PlanState st(client.fork(), cfg);
  st.scorer = opts.scorer;
  auto now_iso = [&st] {
    return text::iso8601(std::chrono::duration_cast<std::chrono::seconds>(st.client.clock().now()).count());
  };

  PlotRun run;
  run.meta.started_at = now_iso();
  PlotDocument& doc = run.doc;
  try {
    if (opts.fixed_premise) {
      doc.premise = text::trim(*opts.fixed_premise);
      if (doc.premise.empty()) throw PreconditionError("fixed premise is empty");
      run.meta.premise_steps = 0;
    } else {
      doc.premise = generate_premise(st);
    }
    doc.setting = generate_setting(st, doc.premise);
    doc.characters = generate_characters(st, doc.premise, doc.setting);

    prompts::OutlineContext ctx;
    ctx.premise = doc.premise;
    ctx.setting = doc.setting;
    ctx.characters_block = prompts::characters_block(doc.characters);
    ctx.existing_top_points = generate_top_outline(st, ctx);

    std::vector<int> targets;
    for (std::size_t i = 0; i < ctx.existing_top_points.size(); ++i) targets.push_back(st.draw(cfg.sub_range));

    for (std::size_t i = 0; i < ctx.existing_top_points.size(); ++i) {
      ctx.current_top_index = static_cast<int>(i + 1);
      ctx.existing_sub_points_under_current.clear();
      ctx.earlier_sub_points.push_back(expand_point(st, ctx, targets[i]));
    }

    for (std::size_t i = 0; i < ctx.existing_top_points.size(); ++i) {
      OutlineSection top;
      top.label = std::to_string(i + 1);
      top.text = ctx.existing_top_points[i];
      const auto& subs = ctx.earlier_sub_points[i];
      for (std::size_t s = 0; s < subs.size(); ++s) {
        OutlineSection sub;
        sub.label = top.label + prompts::sub_letter(s);
        sub.text = subs[s];
        top.children.push_back(std::move(sub));
      }
      doc.outline.push_back(std::move(top));
    }
  } catch (const StepFailed& e) {
    throw PipelineFailed(e);
  }
  annotate_items(st, doc);

  ValidationReport report = validate_structure(doc, cfg);
  RunMeta& meta = run.meta;
  meta.model = st.client.model_name();
  meta.seed = cfg.seed;
  meta.ledger = st.ledger;
  meta.outcomes = std::move(st.outcomes);
  meta.valid = report.valid;
  meta.violations = std::move(report.violations);
  meta.candidates_per_call_factor = st.client.calls_for(cfg.candidates_per_step);
  meta.characters = static_cast<int>(doc.characters.size());
  meta.top_points = static_cast<int>(doc.outline.size());
  for (const auto& top : doc.outline) meta.sub_points += static_cast<int>(top.children.size());
  meta.sub_steps = st.sub_steps;
  meta.wasted_attempts = st.wasted_attempts;
  meta.annotation_calls = st.annotation_calls;
  meta.finished_at = now_iso();
  return run;
}

}  // namespace plotkit
