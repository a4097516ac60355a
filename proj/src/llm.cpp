#include "plotkit/llm.hpp"

#include <thread>

#include "plotkit/errors.hpp"
#include "plotkit/prompts.hpp"
#include "plotkit/text.hpp"

namespace plotkit {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::premise: return "premise";
    case Stage::setting: return "setting";
    case Stage::character_name: return "character_name";
    case Stage::character_portrait: return "character_portrait";
    case Stage::top_outline: return "top_outline";
    case Stage::sub_outline: return "sub_outline";
    case Stage::annotation: return "annotation";
    case Stage::judge: return "judge";
  }
  return "unknown";
}

std::optional<Stage> stage_from_string(std::string_view s) {
  for (Stage st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

void GenerationRequest::check() const {
  if (user.empty()) throw PreconditionError("generation request: user text is empty");
  if (n_candidates < 1) throw PreconditionError("generation request: n_candidates must be >= 1");
  if (temperature < 0.0 || temperature > 2.0) {
    throw PreconditionError("generation request: temperature must be in [0, 2]");
  }
  if (max_tokens < 1) throw PreconditionError("generation request: max_tokens must be >= 1");
  if (stop_sequences.size() > 4) throw PreconditionError("generation request: at most 4 stop sequences");
}

void BackendConfig::check() const {
  if (requests_per_minute < 1) throw PreconditionError("backend config: requests_per_minute must be >= 1");
  if (max_retries < 0 || max_retries > 10) {
    throw PreconditionError("backend config: max_retries must be in [0, 10]");
  }
  if (retry_backoff.count() < 0) throw PreconditionError("backend config: negative retry backoff");
}

Clock::duration SystemClock::now() const {
  return std::chrono::duration_cast<duration>(std::chrono::system_clock::now().time_since_epoch());
}

void SystemClock::sleep_for(duration d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

void FakeClock::sleep_for(duration d) {
  if (d.count() <= 0) return;
  now_ += d.count();
  slept_ += d.count();
}

RateLimiter::RateLimiter(int per_minute, std::shared_ptr<Clock> clock)
    : per_minute_(per_minute), clock_(std::move(clock)) {
  if (per_minute_ < 1) throw PreconditionError("rate limiter: requests per minute must be >= 1");
}

void RateLimiter::acquire() {
  constexpr Clock::duration window = std::chrono::minutes(1);
  while (true) {
    Clock::duration wait{0};
    {
      std::lock_guard lock(mu_);
      const auto now = clock_->now();
      while (!admitted_.empty() && admitted_.front() + window <= now) admitted_.pop_front();
      if (static_cast<int>(admitted_.size()) < per_minute_) {
        admitted_.push_back(now);
        return;
      }
      wait = admitted_.front() + window - now;
    }
    clock_->sleep_for(wait);
  }
}

CallLedger::CallLedger(const CallLedger& other) { *this = other; }

CallLedger& CallLedger::operator=(const CallLedger& other) {
  if (this == &other) return *this;
  total_ = other.total_.load();
  for (std::size_t i = 0; i < per_stage_.size(); ++i) per_stage_[i] = other.per_stage_[i].load();
  std::scoped_lock lock(seq_mu_, other.seq_mu_);
  sequence_ = other.sequence_;
  return *this;
}

void CallLedger::record(Stage stage, std::int64_t count) {
  {
    std::lock_guard lock(seq_mu_);
    for (std::int64_t i = 0; i < count; ++i) sequence_.push_back(stage);
  }
  per_stage_[static_cast<std::size_t>(stage)] += count;
  total_ += count;
}

std::int64_t CallLedger::calls(Stage stage) const {
  return per_stage_[static_cast<std::size_t>(stage)].load();
}

std::vector<Stage> CallLedger::sequence() const {
  std::lock_guard lock(seq_mu_);
  return sequence_;
}

nlohmann::json CallLedger::to_json() const {
  nlohmann::json per_stage = nlohmann::json::object();
  for (Stage st : kAllStages) per_stage[std::string(to_string(st))] = calls(st);
  return {{"total_calls", total_calls()}, {"per_stage_calls", per_stage}};
}

void JsonlWriter::write(const nlohmann::json& j) {
  std::lock_guard lock(mu_);
  out_ << j.dump() << '\n';
  out_.flush();
  if (!out_) throw SinkError("failed to write JSONL output");
}

LlmClient::LlmClient(std::shared_ptr<ChatBackend> backend, BackendConfig cfg,
                     std::shared_ptr<Clock> clock)
    : backend_(std::move(backend)) {
  if (!backend_) throw PreconditionError("llm client: backend is null");
  cfg.check();
  shared_ = std::make_shared<Shared>(std::move(cfg), std::move(clock));
}

LlmClient LlmClient::fork() const { return LlmClient(backend_->fork(), shared_); }

GenerationResult LlmClient::call_with_retries(const GenerationRequest& req, Stage stage) {
  const auto& cfg = shared_->cfg;
  for (int attempt = 0;; ++attempt) {
    shared_->limiter.acquire();
    try {
      GenerationResult res = backend_->generate(req);
      if (res.candidates.empty()) throw FormatError("response contains no candidates");
      if (shared_->log) {
        shared_->log->write({{"stage", to_string(stage)},
                             {"model", backend_->model_name()},
                             {"request",
                              {{"system", req.system ? nlohmann::json(*req.system) : nlohmann::json()},
                               {"user", req.user},
                               {"temperature", req.temperature},
                               {"n", req.n_candidates},
                               {"max_tokens", req.max_tokens},
                               {"stop", req.stop_sequences}}},
                             {"candidates", res.candidates},
                             {"usage",
                              {{"prompt_tokens", res.prompt_tokens},
                               {"completion_tokens", res.completion_tokens}}}});
      }
      return res;
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= cfg.max_retries) throw;
      shared_->clock->sleep_for(cfg.retry_backoff * (std::int64_t{1} << attempt));
    }
  }
}

int LlmClient::calls_for(int n_candidates) const {
  if (n_candidates > 1 && (shared_->cfg.sequential_candidates || !backend_->supports_native_candidates())) {
    return n_candidates;
  }
  return 1;
}

GenerationResult LlmClient::chat_generate(const GenerationRequest& req, Stage stage,
                                          CallLedger* run_ledger) {
  req.check();
  const bool sequential = calls_for(req.n_candidates) > 1;

  if (!sequential) {
    shared_->ledger.record(stage);
    if (run_ledger) run_ledger->record(stage);
    return call_with_retries(req, stage);
  }

  GenerationRequest single = req;
  single.n_candidates = 1;
  GenerationResult merged;
  for (int i = 0; i < req.n_candidates; ++i) {
    shared_->ledger.record(stage);
    if (run_ledger) run_ledger->record(stage);
    GenerationResult part = call_with_retries(single, stage);
    merged.candidates.push_back(std::move(part.candidates.front()));
    merged.prompt_tokens += part.prompt_tokens;
    merged.completion_tokens += part.completion_tokens;
  }
  return merged;
}

std::string complete_with_suffix(LlmClient& client, std::string_view prefix, std::string_view suffix,
                                 const SamplingParams& params, Stage stage, CallLedger* run_ledger) {
  if (prefix.empty()) throw PreconditionError("complete_with_suffix: prefix is empty");
  if (suffix.empty()) throw PreconditionError("complete_with_suffix: suffix is empty");
  GenerationRequest req;
  req.user = prompts::completion_wrapper(prefix, suffix);
  req.max_tokens = params.max_tokens;
  req.temperature = params.temperature;
  req.n_candidates = 1;
  GenerationResult res = client.chat_generate(req, stage, run_ledger);
  return text::trim(res.candidates.front());
}

}  // namespace plotkit
