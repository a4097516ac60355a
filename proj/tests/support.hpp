#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "plotkit/dataset.hpp"
#include "plotkit/llm.hpp"
#include "plotkit/plot.hpp"
#include "plotkit/scripted_backend.hpp"

namespace plotkit_test {

using nlohmann::json;
using namespace plotkit;

inline std::string source_path(const std::string& rel) { return std::string(PLOTKIT_SOURCE_DIR) + "/" + rel; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json fixture_rules() { return json::parse(read_file(source_path("fixtures/run1.json"))); }

// The run1 fixture with `overrides` placed ahead of its own rules.
inline std::shared_ptr<ScriptedBackend> fixture_backend(const std::vector<json>& overrides = {},
                                                        bool native_candidates = true) {
  json j = fixture_rules();
  json rules = json::array();
  for (const auto& o : overrides) rules.push_back(o);
  for (const auto& r : j["rules"]) rules.push_back(r);
  j["rules"] = rules;
  j["native_candidates"] = native_candidates;
  return scripted_backend_from_json(j);
}

inline LlmClient scripted_client(std::shared_ptr<ChatBackend> backend, BackendConfig cfg = {}) {
  cfg.requests_per_minute = 1000000;
  return LlmClient(std::move(backend), cfg, std::make_shared<FakeClock>());
}

// ---------------------------------------------------------------------------
// Random documents

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> words = {
      "the",     "lantern", "harbor",  "quietly", "storm",   "ledger", "river",   "keeper", "orchard",
      "signal",  "returns", "betrays", "finds",   "old",     "silver", "crew",    "island", "letters",
      "promise", "village", "forgets", "scene",   "outline", "winter", "doctor",  "clerk",  "café",
      "naïve",   "don't",   "1959",    "42nd",    "ghost",   "fleet",  "council", "rain",   "market",
      "secret",  "engine",  "map",     "bridge",  "garden",  "choir",  "mirror",  "Ava's",  "twelve"};
  return words;
}

inline std::string random_sentence(std::mt19937_64& rng, int min_words = 3, int max_words = 12) {
  const auto& pool = word_pool();
  const int n = min_words + static_cast<int>(rng() % static_cast<std::uint64_t>(max_words - min_words + 1));
  std::string s;
  for (int i = 0; i < n; ++i) {
    std::string w = pool[rng() % pool.size()];
    if (i == 0 && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
    if (!s.empty()) s += ' ';
    s += w;
    if (i + 1 < n && rng() % 7 == 0) s += ',';
  }
  static const char* ends[] = {".", "!", "?", "...", "."};
  s += ends[rng() % 5];
  return s;
}

inline std::string random_text(std::mt19937_64& rng, int max_sentences = 3) {
  const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_sentences));
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (!s.empty()) s += ' ';
    s += random_sentence(rng);
  }
  return s;
}

inline std::string random_name(std::mt19937_64& rng) {
  static const std::vector<std::string> first = {"Ava",  "Mara",   "Tobias", "Elsie", "Ilse", "Amos",
                                                 "June", "Rafael", "Noor",   "Kenji", "Zoë",  "Li"};
  static const std::vector<std::string> last = {"Rose",  "Quill", "Wren", "Marrow", "Varga", "Fell",
                                                "Starr", "Hale",  "Okafor", "Ibarra", "O'Neil", "Chen"};
  std::string n = first[rng() % first.size()] + " " + last[rng() % last.size()];
  if (rng() % 5 == 0) n = "Captain " + n;
  return n;
}

inline std::vector<Character> random_cast(std::mt19937_64& rng, int count) {
  std::vector<Character> cast;
  while (static_cast<int>(cast.size()) < count) {
    std::string name = random_name(rng);
    bool dup = false;
    for (const auto& c : cast) dup = dup || c.full_name == name;
    if (dup) continue;
    cast.push_back({name, name + " is " + random_sentence(rng)});
  }
  return cast;
}

inline void random_annotations(std::mt19937_64& rng, OutlineSection& item, const std::vector<Character>& cast) {
  if (rng() % 2 == 0) item.scene = "the " + random_sentence(rng, 1, 4);
  if (item.scene) {
    // Scenes never end with a period in canonical form.
    while (!item.scene->empty() && (item.scene->back() == '.' || item.scene->back() == '!' ||
                                    item.scene->back() == '?' || item.scene->back() == ' ')) {
      item.scene->pop_back();
    }
  }
  if (!cast.empty() && rng() % 2 == 0) {
    const std::size_t n = 1 + rng() % cast.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& name = cast[(i + rng()) % cast.size()].full_name;
      bool seen = false;
      for (const auto& m : item.mentioned_characters) seen = seen || m == name;
      if (!seen) item.mentioned_characters.push_back(name);
    }
  }
}

// A document within cfg's structural limits.
inline PlotDocument valid_doc(std::mt19937_64& rng, const PipelineConfig& cfg = {}) {
  auto draw = [&rng](IntRange r) {
    return r.min + static_cast<int>(rng() % static_cast<std::uint64_t>(r.max - r.min + 1));
  };
  PlotDocument d;
  d.premise = random_text(rng, 3);
  d.setting = "The story is set in " + random_text(rng, 2);
  d.characters = random_cast(rng, draw(cfg.char_range));
  const int tops = draw({1, cfg.max_top_points});
  for (int t = 1; t <= tops; ++t) {
    OutlineSection top;
    top.label = std::to_string(t);
    top.text = random_text(rng, 2);
    random_annotations(rng, top, d.characters);
    const int subs = draw(cfg.sub_range);
    for (int s = 0; s < subs; ++s) {
      OutlineSection sub;
      sub.label = top.label + static_cast<char>('a' + s);
      sub.text = random_text(rng, 2);
      random_annotations(rng, sub, d.characters);
      top.children.push_back(std::move(sub));
    }
    d.outline.push_back(std::move(top));
  }
  return d;
}

// Any shape the text format can express: arbitrary counts, multi-line
// premise and setting, orphaned sub-level items.
inline PlotDocument random_doc(std::mt19937_64& rng) {
  PipelineConfig wide;
  wide.char_range = {0, 8};
  wide.max_top_points = 7;
  wide.sub_range = {0, 6};
  PlotDocument d = valid_doc(rng, wide);
  if (rng() % 4 == 0) d.premise += "\n" + random_text(rng, 1);
  if (rng() % 4 == 0) d.setting += "\n" + random_text(rng, 1);
  if (rng() % 6 == 0 && !d.outline.empty()) {
    OutlineSection orphan;
    orphan.label = std::to_string(d.outline.size() + 2) + "a";
    orphan.text = random_text(rng, 1);
    d.outline.push_back(std::move(orphan));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Constructed filter corpus

struct CorpusPlan {
  std::vector<PlotRecord> records;
  std::map<std::string, std::int64_t> expected_report;
  std::int64_t good = 0;
  std::int64_t bad = 0;
};

// Breaks a valid document (3-6 characters, 4 tops, 3-4 subs) so that it
// violates exactly `code`.
inline void inject(PlotDocument& d, ViolationCode code) {
  switch (code) {
    case ViolationCode::CHAR_COUNT: d.characters.resize(2); break;
    case ViolationCode::TOP_COUNT: {
      OutlineSection extra = d.outline.back();
      extra.label = std::to_string(d.outline.size() + 1);
      for (std::size_t i = 0; i < extra.children.size(); ++i) {
        extra.children[i].label = extra.label + static_cast<char>('a' + i);
      }
      d.outline.push_back(std::move(extra));
      break;
    }
    case ViolationCode::SUB_COUNT: d.outline[1].children.resize(2); break;
    case ViolationCode::EMPTY_TEXT: d.outline[0].children[1].text.clear(); break;
    case ViolationCode::LABEL_GAP: d.outline[0].children[1].label = "1" + std::string(1, 'a' + 5); break;
    case ViolationCode::MISSING_TOP: {
      OutlineSection top = d.outline[1];
      d.outline.erase(d.outline.begin() + 1);
      auto at = d.outline.begin() + 1;
      for (auto& c : top.children) at = d.outline.insert(at, c) + 1;
      break;
    }
    case ViolationCode::DUPLICATE_NAME: d.characters.back().full_name = d.characters.front().full_name; break;
    case ViolationCode::NESTING: break;
  }
}

// n records of which the counts in `bad_by_code` are broken one code each,
// interleaved deterministically.
inline CorpusPlan build_corpus(int n, const std::vector<std::pair<ViolationCode, int>>& bad_by_code,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PipelineConfig cfg;
  cfg.max_top_points = 4;

  std::vector<std::optional<ViolationCode>> slots(static_cast<std::size_t>(n));
  int bad_total = 0;
  for (const auto& [code, count] : bad_by_code) {
    for (int i = 0; i < count; ++i) slots[static_cast<std::size_t>(bad_total++)] = code;
  }
  std::shuffle(slots.begin(), slots.end(), rng);

  CorpusPlan plan;
  for (int i = 0; i < n; ++i) {
    PlotDocument d;
    do {
      d = valid_doc(rng, cfg);
    } while (d.outline.size() != 4);
    if (auto code = slots[static_cast<std::size_t>(i)]) {
      inject(d, *code);
      ++plan.expected_report[std::string(to_string(*code))];
      ++plan.bad;
    } else {
      ++plan.good;
    }
    PlotRecord r;
    r.premise = d.premise;
    r.text = render_plot(d);
    r.meta.seed = static_cast<std::uint64_t>(i);
    r.id = record_id(r.premise, r.meta.seed, "corpus");
    r.valid = true;  // stale flag; filtering must recompute it
    plan.records.push_back(std::move(r));
  }
  return plan;
}

}  // namespace plotkit_test
