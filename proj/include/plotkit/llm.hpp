#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace plotkit {

enum class Stage {
  premise,
  setting,
  character_name,
  character_portrait,
  top_outline,
  sub_outline,
  annotation,
  judge,
};

inline constexpr std::array<Stage, 8> kAllStages = {
    Stage::premise,     Stage::setting,     Stage::character_name, Stage::character_portrait,
    Stage::top_outline, Stage::sub_outline, Stage::annotation,     Stage::judge};

std::string_view to_string(Stage stage);
std::optional<Stage> stage_from_string(std::string_view s);

struct GenerationRequest {
  std::optional<std::string> system;
  std::string user;
  int max_tokens = 256;
  double temperature = 0.7;
  int n_candidates = 1;
  std::vector<std::string> stop_sequences;

  // Throws PreconditionError unless user is non-empty, n >= 1,
  // 0 <= temperature <= 2, max_tokens >= 1 and at most 4 stop sequences.
  void check() const;
};

struct GenerationResult {
  std::vector<std::string> candidates;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

// Time source for rate limiting, backoff and timestamps. FakeClock lets tests
// simulate minutes of throttling instantly.
class Clock {
 public:
  using duration = std::chrono::milliseconds;

  virtual ~Clock() = default;
  virtual duration now() const = 0;  // since the Unix epoch
  virtual void sleep_for(duration d) = 0;
};

class SystemClock final : public Clock {
 public:
  duration now() const override;
  void sleep_for(duration d) override;
};

class FakeClock final : public Clock {
 public:
  explicit FakeClock(duration start = duration{0}) : now_(start.count()) {}
  duration now() const override { return duration{now_.load()}; }
  void sleep_for(duration d) override;
  void advance(duration d) { now_ += d.count(); }
  duration total_slept() const { return duration{slept_.load()}; }

 private:
  std::atomic<std::int64_t> now_;
  std::atomic<std::int64_t> slept_{0};
};

// Admits at most `per_minute` calls in any sliding 60 s window. Only the
// admission decision is serialized; waiting happens outside the lock.
class RateLimiter {
 public:
  RateLimiter(int per_minute, std::shared_ptr<Clock> clock);

  void acquire();
  int per_minute() const noexcept { return per_minute_; }

 private:
  int per_minute_;
  std::shared_ptr<Clock> clock_;
  std::mutex mu_;
  std::deque<Clock::duration> admitted_;
};

// Counts API calls per stage. Thread-safe; also keeps the chronological
// stage sequence so ordering properties can be checked after a run.
class CallLedger {
 public:
  CallLedger() = default;
  CallLedger(const CallLedger& other);
  CallLedger& operator=(const CallLedger& other);

  void record(Stage stage, std::int64_t count = 1);

  std::int64_t total_calls() const { return total_.load(); }
  std::int64_t calls(Stage stage) const;
  std::vector<Stage> sequence() const;

  nlohmann::json to_json() const;

 private:
  std::atomic<std::int64_t> total_{0};
  std::array<std::atomic<std::int64_t>, kAllStages.size()> per_stage_{};
  mutable std::mutex seq_mu_;
  std::vector<Stage> sequence_;
};

// Transport-level backend: one generate() is one API request. Implementations
// throw TransportError, AuthError or FormatError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  virtual GenerationResult generate(const GenerationRequest& req) = 0;

  // Whether one request can return several candidates (the "n" parameter).
  virtual bool supports_native_candidates() const { return true; }
  virtual std::string model_name() const = 0;

  // Independent instance for one pipeline run. Stateless backends return
  // themselves; scripted backends return a copy with fresh cursors.
  virtual std::shared_ptr<ChatBackend> fork() = 0;
};

struct BackendConfig {
  std::string base_url = "http://localhost:8000/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model_name = "gpt-4";
  int requests_per_minute = 60;
  int max_retries = 3;
  Clock::duration retry_backoff{1000};  // first delay; doubles per retry
  // Request candidates one call at a time even when the endpoint accepts n.
  bool sequential_candidates = false;
  double timeout_seconds = 120.0;

  void check() const;
};

// Thread-safe line-oriented JSONL sink shared by writers.
class JsonlWriter {
 public:
  explicit JsonlWriter(std::ostream& out) : out_(out) {}
  void write(const nlohmann::json& j);

 private:
  std::ostream& out_;
  std::mutex mu_;
};

// Shared client handle: backend + rate limiter + retries + call accounting.
// Copies share the ledger, limiter and log; fork() also forks the backend.
class LlmClient {
 public:
  LlmClient(std::shared_ptr<ChatBackend> backend, BackendConfig cfg,
            std::shared_ptr<Clock> clock = std::make_shared<SystemClock>());

  // One logical call. Increments the ledger once (native candidates) or once
  // per candidate (sequential fallback), plus `run_ledger` when given.
  GenerationResult chat_generate(const GenerationRequest& req, Stage stage,
                                 CallLedger* run_ledger = nullptr);

  LlmClient fork() const;

  // API calls charged for one request asking for n candidates.
  int calls_for(int n_candidates) const;

  const CallLedger& ledger() const { return shared_->ledger; }
  const BackendConfig& config() const { return shared_->cfg; }
  Clock& clock() const { return *shared_->clock; }
  std::string model_name() const { return backend_->model_name(); }

  // Every request/response pair is appended to `log` as one JSON line.
  void set_log(std::shared_ptr<JsonlWriter> log) { shared_->log = std::move(log); }

 private:
  struct Shared {
    Shared(BackendConfig c, std::shared_ptr<Clock> clk)
        : cfg(std::move(c)), clock(std::move(clk)), limiter(cfg.requests_per_minute, clock) {}
    BackendConfig cfg;
    std::shared_ptr<Clock> clock;
    RateLimiter limiter;
    CallLedger ledger;
    std::shared_ptr<JsonlWriter> log;
  };

  LlmClient(std::shared_ptr<ChatBackend> backend, std::shared_ptr<Shared> shared)
      : backend_(std::move(backend)), shared_(std::move(shared)) {}

  GenerationResult call_with_retries(const GenerationRequest& req, Stage stage);

  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<Shared> shared_;
};

struct SamplingParams {
  int max_tokens = 256;
  double temperature = 0.7;
};

// Completion-via-chat: wraps prefix and suffix into the completion-robot
// prompt (suffix first) and returns the first candidate, trimmed.
std::string complete_with_suffix(LlmClient& client, std::string_view prefix, std::string_view suffix,
                                 const SamplingParams& params, Stage stage,
                                 CallLedger* run_ledger = nullptr);

}  // namespace plotkit
