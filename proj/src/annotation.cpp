#include "plotkit/annotation.hpp"

#include <unistd.h>

#include <algorithm>
#include <fstream>

#include "plotkit/text.hpp"

namespace plotkit {

std::vector<TaskQuestion> task_questions() {
  std::vector<TaskQuestion> out;
  for (Question q : {Question::Q1, Question::Q2, Question::Q3, Question::Q4, Question::Q5, Question::Q6}) {
    out.push_back({q, std::string(question_text(q))});
  }
  return out;
}

void to_json(nlohmann::json& j, const AnnotationTask& t) {
  nlohmann::json questions = nlohmann::json::array();
  for (const auto& q : t.questions) questions.push_back({{"id", to_string(q.id)}, {"text", q.text}});
  j = nlohmann::json{{"pair_id", t.pair_id},
                     {"premise", t.premise},
                     {"plot_a_text", t.plot_a_text},
                     {"plot_b_text", t.plot_b_text},
                     {"questions", questions}};
}

void to_json(nlohmann::json& j, const AnnotationResponse& r) {
  nlohmann::json choices = nlohmann::json::object();
  for (const auto& [q, c] : r.choices) choices[std::string(to_string(q))] = to_string(c);
  j = nlohmann::json{{"pair_id", r.pair_id},
                     {"annotator", r.annotator_id},
                     {"choices", choices},
                     {"q2_explanation", r.q2_explanation},
                     {"submitted_at", r.submitted_at}};
}

void from_json(const nlohmann::json& j, AnnotationResponse& r) {
  r.pair_id = j.value("pair_id", std::string{});
  r.annotator_id = j.value("annotator", std::string{});
  r.q2_explanation = j.value("q2_explanation", std::string{});
  r.submitted_at = j.value("submitted_at", std::string{});
  r.choices.clear();
  if (!j.contains("choices")) return;
  if (!j["choices"].is_object()) throw FormatError("choices must be an object");
  for (const auto& [key, value] : j["choices"].items()) {
    auto q = question_from_string(key);
    if (!q || *q == Question::Q2) throw FormatError("unknown choice question '" + key + "'");
    if (!value.is_string()) throw FormatError("choice for " + key + " must be a string");
    auto c = choice_from_string(value.get<std::string>());
    if (!c) throw FormatError("unknown choice '" + value.get<std::string>() + "' for " + key);
    r.choices[*q] = *c;
  }
}

std::string_view to_string(ValidationCode c) {
  switch (c) {
    case ValidationCode::WORD_COUNT: return "WORD_COUNT";
    case ValidationCode::MISSING_CHOICE: return "MISSING_CHOICE";
    case ValidationCode::UNKNOWN_PAIR: return "UNKNOWN_PAIR";
    case ValidationCode::MISSING_ANNOTATOR: return "MISSING_ANNOTATOR";
  }
  return "UNKNOWN";
}

namespace {

std::string join_issues(const std::vector<ValidationIssue>& issues) {
  std::string out = "invalid annotation:";
  for (const auto& i : issues) out += " " + std::string(to_string(i.code)) + "(" + i.field + ")";
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<ValidationIssue> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

bool ValidationError::has(ValidationCode c) const {
  return std::any_of(issues_.begin(), issues_.end(), [c](const auto& i) { return i.code == c; });
}

AnnotationStore::AnnotationStore() = default;

AnnotationStore::AnnotationStore(std::filesystem::path path) {
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      try {
        auto r = nlohmann::json::parse(line).get<AnnotationResponse>();
        if (index_.emplace(r.pair_id, r.annotator_id).second) log_.push_back(std::move(r));
      } catch (const std::exception&) {
        ++skipped_;
      }
    }
  }
  file_ = std::fopen(path.c_str(), "a+b");
  if (!file_) throw SinkError("cannot open annotation store " + path.string());
  // Terminate a torn final line so the next append starts cleanly.
  if (std::fseek(file_, 0, SEEK_END) == 0 && std::ftell(file_) > 0) {
    std::fseek(file_, -1, SEEK_END);
    if (std::fgetc(file_) != '\n') {
      std::fseek(file_, 0, SEEK_END);
      std::fputc('\n', file_);
      std::fflush(file_);
    }
  }
}

AnnotationStore::~AnnotationStore() {
  if (file_) std::fclose(file_);
}

void AnnotationStore::append(const AnnotationResponse& r) {
  std::lock_guard lock(mu_);
  if (index_.count({r.pair_id, r.annotator_id})) {
    throw DuplicateError("annotator " + r.annotator_id + " already labeled pair " + r.pair_id);
  }
  if (file_) {
    const std::string line = nlohmann::json(r).dump() + "\n";
    std::fseek(file_, 0, SEEK_END);
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0 ||
        ::fsync(::fileno(file_)) != 0) {
      throw SinkError("annotation store write failed");
    }
  }
  index_.emplace(r.pair_id, r.annotator_id);
  log_.push_back(r);
}

bool AnnotationStore::contains(const std::string& pair_id, const std::string& annotator_id) const {
  std::lock_guard lock(mu_);
  return index_.count({pair_id, annotator_id}) > 0;
}

std::size_t AnnotationStore::size() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

std::vector<AnnotationResponse> AnnotationStore::responses() const {
  std::lock_guard lock(mu_);
  return log_;
}

void to_json(nlohmann::json& j, const PreferenceLine& p) {
  j = nlohmann::json{{"pair_id", p.pair_id},
                     {"premise", p.premise},
                     {"chosen_text", p.chosen_text},
                     {"rejected_text", p.rejected_text},
                     {"annotator", p.annotator_id}};
  if (p.q2_explanation) j["q2_explanation"] = *p.q2_explanation;
}

AnnotationService::AnnotationService(std::vector<PreferencePair> pairs, std::shared_ptr<AnnotationStore> store,
                                     std::shared_ptr<Clock> clock)
    : pairs_(std::move(pairs)), store_(std::move(store)), clock_(std::move(clock)) {
  if (!store_) throw PreconditionError("annotation service needs a store");
  std::sort(pairs_.begin(), pairs_.end(),
            [](const PreferencePair& a, const PreferencePair& b) { return a.pair_id < b.pair_id; });
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (!by_id_.emplace(pairs_[i].pair_id, i).second) {
      throw PreconditionError("duplicate pair_id " + pairs_[i].pair_id);
    }
    label_counts_[pairs_[i].pair_id] = 0;
  }
  for (const auto& r : store_->responses()) {
    auto it = label_counts_.find(r.pair_id);
    if (it != label_counts_.end()) ++it->second;
  }
}

std::optional<AnnotationTask> AnnotationService::next_task(const std::string& annotator_id) const {
  std::lock_guard lock(mu_);
  const PreferencePair* best = nullptr;
  std::size_t best_count = 0;
  for (const auto& p : pairs_) {
    if (store_->contains(p.pair_id, annotator_id)) continue;
    const std::size_t count = label_counts_.at(p.pair_id);
    if (!best || count < best_count) {
      best = &p;
      best_count = count;
    }
  }
  if (!best) return std::nullopt;
  return AnnotationTask{best->pair_id, best->premise, best->plot_a.text, best->plot_b.text, task_questions()};
}

std::vector<ValidationIssue> AnnotationService::validate(const AnnotationResponse& r) const {
  std::vector<ValidationIssue> issues;
  if (text::trim(r.annotator_id).empty()) {
    issues.push_back({ValidationCode::MISSING_ANNOTATOR, "annotator", "annotator id is required"});
  }
  if (!by_id_.count(r.pair_id)) {
    issues.push_back({ValidationCode::UNKNOWN_PAIR, "pair_id", "unknown pair '" + r.pair_id + "'"});
  }
  for (Question q : kChoiceQuestions) {
    if (!r.choices.count(q)) {
      issues.push_back({ValidationCode::MISSING_CHOICE, std::string(to_string(q)), "no answer"});
    }
  }
  const std::size_t words = text::word_count(r.q2_explanation);
  if (words < kMinExplanationWords) {
    issues.push_back({ValidationCode::WORD_COUNT, "Q2",
                      "explanation has " + std::to_string(words) + " words, at least " +
                          std::to_string(kMinExplanationWords) + " required"});
  }
  return issues;
}

AnnotationResponse AnnotationService::submit(AnnotationResponse r) {
  auto issues = validate(r);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  if (r.submitted_at.empty()) {
    r.submitted_at =
        text::iso8601(std::chrono::duration_cast<std::chrono::seconds>(clock_->now()).count());
  }
  std::lock_guard lock(mu_);
  store_->append(r);
  ++label_counts_[r.pair_id];
  return r;
}

std::vector<PreferenceLine> AnnotationService::export_preferences(Question q, bool include_explanation) const {
  if (q == Question::Q2) throw PreconditionError("Q2 has no choice to export");
  std::vector<PreferenceLine> out;
  for (const auto& r : store_->responses()) {
    auto c = r.choices.find(q);
    if (c == r.choices.end() || (c->second != Choice::PLOT_A && c->second != Choice::PLOT_B)) continue;
    auto p = by_id_.find(r.pair_id);
    if (p == by_id_.end()) continue;
    const PreferencePair& pair = pairs_[p->second];
    const bool a_wins = c->second == Choice::PLOT_A;
    PreferenceLine line{pair.pair_id,
                        pair.premise,
                        a_wins ? pair.plot_a.text : pair.plot_b.text,
                        a_wins ? pair.plot_b.text : pair.plot_a.text,
                        r.annotator_id,
                        std::nullopt};
    if (include_explanation) line.q2_explanation = r.q2_explanation;
    out.push_back(std::move(line));
  }
  return out;
}

LabelTable AnnotationService::label_stats() const {
  std::vector<ChoiceSet> sets;
  for (const auto& r : store_->responses()) sets.push_back(r.choices);
  return corpus_stats(sets);
}

}  // namespace plotkit
