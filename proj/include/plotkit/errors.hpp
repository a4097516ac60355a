#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace plotkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition (empty suffix, n == 0, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string expected, const std::string& detail = {})
      : Error("line " + std::to_string(line) + ": expected " + expected +
              (detail.empty() ? std::string{} : " (" + detail + ")")),
        line_(line),
        expected_(std::move(expected)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t line_;
  std::string expected_;
};

// Transport-class failure. Retryable ones (connection errors, 429, 5xx) are
// retried by LlmClient; non-retryable ones propagate immediately.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what, bool retryable = true)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class UnmatchedPromptError : public Error {
 public:
  explicit UnmatchedPromptError(std::string prompt)
      : Error("no scripted rule matches prompt: " + prompt.substr(0, 200)),
        prompt_(std::move(prompt)) {}
  const std::string& prompt() const noexcept { return prompt_; }

 private:
  std::string prompt_;
};

class StepFailed : public Error {
 public:
  StepFailed(std::string stage, const std::string& why)
      : Error("step " + stage + " failed: " + why), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

class PipelineFailed : public Error {
 public:
  explicit PipelineFailed(const StepFailed& cause)
      : Error("pipeline failed: " + std::string(cause.what())), stage_(cause.stage()) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

class SinkError : public Error {
 public:
  using Error::Error;
};

}  // namespace plotkit
