#pragma once

#include <memory>
#include <string>

#include "json.hpp"
#include "plotkit/llm.hpp"

namespace plotkit {

// Client for endpoints speaking the chat-completions protocol:
//   POST {base_url}/chat/completions
//   {model, messages: [{role, content}...], temperature, n, max_tokens, stop}
// Candidates come from choices[i].message.content, token counts from usage.
// The API key is read from the environment variable cfg.api_key_env and sent
// as a bearer token.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendConfig cfg);
  ~HttpChatBackend() override;

  GenerationResult generate(const GenerationRequest& req) override;
  bool supports_native_candidates() const override { return !cfg_.sequential_candidates; }
  std::string model_name() const override { return cfg_.model_name; }
  std::shared_ptr<ChatBackend> fork() override;

 private:
  BackendConfig cfg_;
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // e.g. "/v1"
};

// Request body for one chat-completions call.
nlohmann::json chat_request_body(const GenerationRequest& req, const std::string& model);

// Parses a chat-completions response body. Throws FormatError when no
// choices[i].message.content strings are present.
GenerationResult parse_chat_response(const std::string& body);

struct UrlParts {
  std::string origin;
  std::string path;
};
// Splits "https://api.example.com/v1" into {"https://api.example.com", "/v1"}.
UrlParts split_base_url(const std::string& base_url);

}  // namespace plotkit
