#include "plotkit/scripted_backend.hpp"

#include <fstream>
#include <map>

#include "plotkit/errors.hpp"
#include "plotkit/text.hpp"

namespace plotkit {
namespace {

std::vector<ScriptedReply> as_replies(std::vector<std::string> texts) {
  std::vector<ScriptedReply> out;
  out.reserve(texts.size());
  for (auto& t : texts) out.push_back(ScriptedReply::ok(std::move(t)));
  return out;
}

ScriptedReply reply_from_json(const nlohmann::json& j) {
  if (j.is_string()) return ScriptedReply::ok(j.get<std::string>());
  if (j.is_object() && j.contains("error")) {
    const std::string kind = j.at("error").get<std::string>();
    if (kind == "transport") return ScriptedReply::fail(ScriptedReply::Kind::transport_error);
    if (kind == "auth") return ScriptedReply::fail(ScriptedReply::Kind::auth_error);
    if (kind == "format") return ScriptedReply::fail(ScriptedReply::Kind::format_error);
    throw PreconditionError("scripted rules: unknown error kind '" + kind + "'");
  }
  throw PreconditionError("scripted rules: a response must be a string or {\"error\": ...}");
}

}  // namespace

ScriptedRule ScriptedRule::contains(std::string needle, std::vector<std::string> replies) {
  ScriptedRule r;
  r.match = Match::substring;
  r.pattern = std::move(needle);
  r.responses = as_replies(std::move(replies));
  return r;
}

ScriptedRule ScriptedRule::regex(std::string pattern, std::vector<std::string> replies) {
  ScriptedRule r;
  r.match = Match::regex;
  r.pattern = std::move(pattern);
  r.responses = as_replies(std::move(replies));
  return r;
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptedRule> rules, std::string model)
    : rules_(std::move(rules)), model_(std::move(model)) {
  if (rules_.empty()) throw PreconditionError("scripted backend needs at least one rule");
  for (const auto& r : rules_) {
    if (r.responses.empty()) throw PreconditionError("scripted rule '" + r.pattern + "' has no responses");
    if (r.match == ScriptedRule::Match::regex) {
      compiled_.emplace_back(std::regex(r.pattern, std::regex::ECMAScript));
    } else {
      compiled_.emplace_back(std::nullopt);
    }
  }
  cursors_.assign(rules_.size(), 0);
  hits_.assign(rules_.size(), 0);
}

GenerationResult ScriptedBackend::generate(const GenerationRequest& req) {
  std::size_t idx = rules_.size();
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i];
    bool matched = false;
    switch (r.match) {
      case ScriptedRule::Match::substring: matched = req.user.find(r.pattern) != std::string::npos; break;
      case ScriptedRule::Match::exact: matched = req.user == r.pattern; break;
      case ScriptedRule::Match::regex: matched = std::regex_search(req.user, *compiled_[i]); break;
    }
    if (matched) {
      idx = i;
      break;
    }
  }
  if (idx == rules_.size()) throw UnmatchedPromptError(req.user);

  GenerationResult res;
  {
    std::lock_guard lock(mu_);
    ++hits_[idx];
    const auto& replies = rules_[idx].responses;
    for (int k = 0; k < req.n_candidates; ++k) {
      const ScriptedReply& reply = replies[cursors_[idx] % replies.size()];
      ++cursors_[idx];
      switch (reply.kind) {
        case ScriptedReply::Kind::text: res.candidates.push_back(reply.text); break;
        case ScriptedReply::Kind::transport_error: throw TransportError("scripted transport failure");
        case ScriptedReply::Kind::auth_error: throw AuthError("scripted credential rejection");
        case ScriptedReply::Kind::format_error: throw FormatError("scripted malformed response");
      }
    }
  }
  res.prompt_tokens = static_cast<std::int64_t>(text::word_count(req.user));
  for (const auto& c : res.candidates) res.completion_tokens += static_cast<std::int64_t>(text::word_count(c));
  return res;
}

std::shared_ptr<ChatBackend> ScriptedBackend::fork() {
  auto copy = std::make_shared<ScriptedBackend>(rules_, model_);
  copy->native_candidates_ = native_candidates_;
  return copy;
}

std::size_t ScriptedBackend::hits(std::size_t rule_index) const {
  std::lock_guard lock(mu_);
  return hits_.at(rule_index);
}

std::shared_ptr<ScriptedBackend> scripted_backend_from_json(const nlohmann::json& j) {
  std::vector<ScriptedRule> rules;
  for (const auto& jr : j.at("rules")) {
    ScriptedRule r;
    if (jr.contains("contains")) {
      r.match = ScriptedRule::Match::substring;
      r.pattern = jr["contains"].get<std::string>();
    } else if (jr.contains("regex")) {
      r.match = ScriptedRule::Match::regex;
      r.pattern = jr["regex"].get<std::string>();
    } else if (jr.contains("exact")) {
      r.match = ScriptedRule::Match::exact;
      r.pattern = jr["exact"].get<std::string>();
    } else {
      throw PreconditionError("scripted rules: each rule needs contains, regex or exact");
    }
    r.name = jr.value("name", std::string{});
    for (const auto& reply : jr.at("responses")) r.responses.push_back(reply_from_json(reply));
    rules.push_back(std::move(r));
  }
  auto backend = std::make_shared<ScriptedBackend>(std::move(rules), j.value("model", std::string("scripted")));
  backend->set_native_candidates(j.value("native_candidates", true));
  return backend;
}

std::shared_ptr<ScriptedBackend> load_scripted_backend(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open rules file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw PreconditionError("rules file " + path + " is not valid JSON: " + e.what());
  }
  return scripted_backend_from_json(j);
}

std::shared_ptr<ScriptedBackend> replay_backend_from_log(std::istream& log) {
  std::vector<ScriptedRule> rules;
  std::map<std::string, std::size_t> by_prompt;
  std::string line;
  while (std::getline(log, line)) {
    if (text::trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    std::string user = j.at("request").at("user").get<std::string>();
    auto [it, inserted] = by_prompt.emplace(user, rules.size());
    if (inserted) {
      ScriptedRule r;
      r.match = ScriptedRule::Match::exact;
      r.pattern = user;
      r.name = j.value("stage", std::string{});
      rules.push_back(std::move(r));
    }
    for (const auto& c : j.at("candidates")) {
      rules[it->second].responses.push_back(ScriptedReply::ok(c.get<std::string>()));
    }
  }
  return std::make_shared<ScriptedBackend>(std::move(rules), "replay");
}

}  // namespace plotkit
