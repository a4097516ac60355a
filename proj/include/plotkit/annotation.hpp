#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "plotkit/dataset.hpp"
#include "plotkit/errors.hpp"
#include "plotkit/llm.hpp"
#include "plotkit/pairs.hpp"

namespace plotkit {

inline constexpr std::size_t kMinExplanationWords = 25;

struct TaskQuestion {
  Question id;
  std::string text;
};

// Question list in presentation order: Q1, Q2, Q3, Q4, Q5, Q6.
std::vector<TaskQuestion> task_questions();

struct AnnotationTask {
  std::string pair_id;
  std::string premise;
  std::string plot_a_text;
  std::string plot_b_text;
  std::vector<TaskQuestion> questions;
};

void to_json(nlohmann::json& j, const AnnotationTask& t);

struct AnnotationResponse {
  std::string pair_id;
  std::string annotator_id;
  ChoiceSet choices;  // Q1, Q3, Q4, Q5, Q6
  std::string q2_explanation;
  std::string submitted_at;

  bool operator==(const AnnotationResponse&) const = default;
};

// {pair_id, annotator, choices{Q1: "PLOT_A", ...}, q2_explanation, submitted_at}
void to_json(nlohmann::json& j, const AnnotationResponse& r);
void from_json(const nlohmann::json& j, AnnotationResponse& r);

enum class ValidationCode { WORD_COUNT, MISSING_CHOICE, UNKNOWN_PAIR, MISSING_ANNOTATOR };

std::string_view to_string(ValidationCode c);

struct ValidationIssue {
  ValidationCode code;
  std::string field;
  std::string message;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues);
  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }
  bool has(ValidationCode c) const;

 private:
  std::vector<ValidationIssue> issues_;
};

class DuplicateError : public Error {
 public:
  using Error::Error;
};

// Append-only response log. With a path, every append is flushed and synced
// before returning and the file is replayed on construction. Without one the
// store lives in memory.
class AnnotationStore {
 public:
  AnnotationStore();
  explicit AnnotationStore(std::filesystem::path path);
  ~AnnotationStore();

  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  // Throws DuplicateError when (pair_id, annotator_id) is already present.
  void append(const AnnotationResponse& r);

  bool contains(const std::string& pair_id, const std::string& annotator_id) const;
  std::size_t size() const;
  std::vector<AnnotationResponse> responses() const;
  // Unparseable lines ignored during replay (a torn final write).
  std::size_t skipped_lines() const { return skipped_; }

 private:
  mutable std::mutex mu_;
  std::vector<AnnotationResponse> log_;
  std::set<std::pair<std::string, std::string>> index_;
  std::FILE* file_ = nullptr;
  std::size_t skipped_ = 0;
};

struct PreferenceLine {
  std::string pair_id;
  std::string premise;
  std::string chosen_text;
  std::string rejected_text;
  std::string annotator_id;
  std::optional<std::string> q2_explanation;
};

void to_json(nlohmann::json& j, const PreferenceLine& p);

class AnnotationService {
 public:
  AnnotationService(std::vector<PreferencePair> pairs, std::shared_ptr<AnnotationStore> store,
                    std::shared_ptr<Clock> clock = std::make_shared<SystemClock>());

  // Pair not yet labeled by this annotator with the fewest labels overall;
  // ties go to the smallest pair_id. nullopt when none remain.
  std::optional<AnnotationTask> next_task(const std::string& annotator_id) const;

  // Every problem with the response; empty when acceptable.
  std::vector<ValidationIssue> validate(const AnnotationResponse& r) const;

  // Validates, stamps submitted_at when empty and appends. Throws
  // ValidationError or DuplicateError; the store is unchanged on error.
  AnnotationResponse submit(AnnotationResponse r);

  // Responses answering PLOT_A or PLOT_B to `q`, resolved to chosen/rejected.
  std::vector<PreferenceLine> export_preferences(Question q, bool include_explanation = false) const;

  LabelTable label_stats() const;

  std::size_t pair_count() const { return pairs_.size(); }
  const AnnotationStore& store() const { return *store_; }

 private:
  std::vector<PreferencePair> pairs_;  // sorted by pair_id
  std::map<std::string, std::size_t> by_id_;
  std::shared_ptr<AnnotationStore> store_;
  std::shared_ptr<Clock> clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> label_counts_;
};

}  // namespace plotkit
