#include "plotkit/http_backend.hpp"

#include <cstdlib>

#include "httplib.h"
#include "plotkit/errors.hpp"

namespace plotkit {

UrlParts split_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw PreconditionError("base_url needs a scheme: " + base_url);
  auto path_start = base_url.find('/', scheme_end + 3);
  UrlParts parts;
  if (path_start == std::string::npos) {
    parts.origin = base_url;
  } else {
    parts.origin = base_url.substr(0, path_start);
    parts.path = base_url.substr(path_start);
  }
  while (!parts.path.empty() && parts.path.back() == '/') parts.path.pop_back();
  return parts;
}

nlohmann::json chat_request_body(const GenerationRequest& req, const std::string& model) {
  nlohmann::json messages = nlohmann::json::array();
  if (req.system) messages.push_back({{"role", "system"}, {"content", *req.system}});
  messages.push_back({{"role", "user"}, {"content", req.user}});
  nlohmann::json body{{"model", model},
                      {"messages", messages},
                      {"temperature", req.temperature},
                      {"n", req.n_candidates},
                      {"max_tokens", req.max_tokens}};
  if (!req.stop_sequences.empty()) body["stop"] = req.stop_sequences;
  return body;
}

GenerationResult parse_chat_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("response is not JSON: ") + e.what());
  }
  GenerationResult res;
  if (j.contains("choices") && j["choices"].is_array()) {
    for (const auto& choice : j["choices"]) {
      if (choice.contains("message") && choice["message"].contains("content") &&
          choice["message"]["content"].is_string()) {
        res.candidates.push_back(choice["message"]["content"].get<std::string>());
      }
    }
  }
  if (res.candidates.empty()) throw FormatError("response has no choices[i].message.content");
  if (j.contains("usage") && j["usage"].is_object()) {
    res.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
    res.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
  }
  return res;
}

HttpChatBackend::HttpChatBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.check();
  auto parts = split_base_url(cfg_.base_url);
  origin_ = parts.origin;
  path_prefix_ = parts.path;
}

HttpChatBackend::~HttpChatBackend() = default;

std::shared_ptr<ChatBackend> HttpChatBackend::fork() {
  return std::make_shared<HttpChatBackend>(cfg_);
}

GenerationResult HttpChatBackend::generate(const GenerationRequest& req) {
  httplib::Client client(origin_);
  const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
  client.set_connection_timeout(secs);
  client.set_read_timeout(secs);
  client.set_write_timeout(secs);

  httplib::Headers headers{{"Accept", "application/json"}};
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const std::string body = chat_request_body(req, cfg_.model_name).dump();
  auto result = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
  if (!result) {
    throw TransportError("connection to " + origin_ + " failed: " + httplib::to_string(result.error()));
  }
  const int status = result->status;
  if (status == 401 || status == 403) {
    throw AuthError("credentials rejected (HTTP " + std::to_string(status) + ")");
  }
  if (status == 408 || status == 429 || status >= 500) {
    throw TransportError("HTTP " + std::to_string(status) + ": " + result->body.substr(0, 200));
  }
  if (status < 200 || status >= 300) {
    throw TransportError("HTTP " + std::to_string(status) + ": " + result->body.substr(0, 200),
                         /*retryable=*/false);
  }
  return parse_chat_response(result->body);
}

}  // namespace plotkit
