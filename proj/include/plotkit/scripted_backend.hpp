#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "json.hpp"
#include "plotkit/errors.hpp"
#include "plotkit/llm.hpp"

namespace plotkit {

// One scripted reply. A reply may inject a failure instead of text, which is
// how tests drive the retry and error paths.
struct ScriptedReply {
  enum class Kind { text, transport_error, auth_error, format_error };

  Kind kind = Kind::text;
  std::string text;

  static ScriptedReply ok(std::string t) { return {Kind::text, std::move(t)}; }
  static ScriptedReply fail(Kind k) { return {k, {}}; }
};

struct ScriptedRule {
  enum class Match { substring, regex, exact };

  Match match = Match::substring;
  std::string pattern;
  std::vector<ScriptedReply> responses;  // served cyclically
  std::string name;                      // optional, for diagnostics

  static ScriptedRule contains(std::string needle, std::vector<std::string> replies);
  static ScriptedRule regex(std::string pattern, std::vector<std::string> replies);
};

// Deterministic test double. The first rule whose matcher accepts the user
// text answers with its next reply(s) in cycle; unmatched prompts throw
// UnmatchedPromptError. A request for n candidates consumes n replies.
class ScriptedBackend final : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<ScriptedRule> rules, std::string model = "scripted");

  GenerationResult generate(const GenerationRequest& req) override;
  std::string model_name() const override { return model_; }
  std::shared_ptr<ChatBackend> fork() override;

  void set_native_candidates(bool on) { native_candidates_ = on; }
  bool supports_native_candidates() const override { return native_candidates_; }

  // Number of generate() calls answered by rule i (failures included).
  std::size_t hits(std::size_t rule_index) const;
  const std::vector<ScriptedRule>& rules() const { return rules_; }

 private:
  std::vector<ScriptedRule> rules_;
  std::vector<std::optional<std::regex>> compiled_;
  std::vector<std::size_t> cursors_;
  std::vector<std::size_t> hits_;
  std::string model_;
  bool native_candidates_ = true;
  mutable std::mutex mu_;
};

// Rules file:
//   {"model": "...", "native_candidates": true,
//    "rules": [{"contains"|"regex"|"exact": "...", "name": "...",
//               "responses": ["text", {"error": "transport"|"auth"|"format"}]}]}
std::shared_ptr<ScriptedBackend> scripted_backend_from_json(const nlohmann::json& j);
std::shared_ptr<ScriptedBackend> load_scripted_backend(const std::string& path);

// Replays a request/response JSONL log written by LlmClient: each logged
// user prompt becomes an exact-match rule serving the logged candidates.
std::shared_ptr<ScriptedBackend> replay_backend_from_log(std::istream& log);

}  // namespace plotkit
