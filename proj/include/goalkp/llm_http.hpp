#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "goalkp/errors.hpp"
#include "goalkp/llm.hpp"

namespace goalkp {

inline constexpr const char* kApiBaseEnvVar = "GOALKP_API_BASE";
inline constexpr const char* kApiKeyEnvVar = "GOALKP_API_KEY";

// Request body in the OpenAI chat-completions dialect.
inline nlohmann::json chat_completion_body(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const ChatMessage& m : request.messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", request.model},
          {"messages", messages},
          {"temperature", request.temperature},
          {"top_p", request.top_p},
          {"max_tokens", request.max_output_tokens},
          {"n", 1}};
}

// Extracts choices[0].message.content; a 200 with any other shape is a
// contract violation, not a retryable failure.
inline std::string parse_chat_completion_body(const std::string& body) {
  try {
    nlohmann::json doc = nlohmann::json::parse(body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed chat completion response: ") +
                         e.what(),
                     body);
  }
}

// POSTs to {base}/v1/chat/completions with a bearer token. Connection
// failures surface as status 0 so the retry layer treats them as transient.
class HttpTransport : public ChatTransport {
public:
  HttpTransport(std::string base_url, std::string api_key)
      : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {
    if (base_url_.empty())
      throw ValidationError("endpoint URL must not be empty");
    if (api_key_.empty())
      throw ValidationError(std::string("API key missing: set ") +
                            kApiKeyEnvVar);
  }

  static HttpTransport from_env() {
    const char* base = std::getenv(kApiBaseEnvVar);
    const char* key = std::getenv(kApiKeyEnvVar);
    if (key == nullptr || *key == '\0')
      throw ValidationError(std::string("API key missing: set ") +
                            kApiKeyEnvVar);
    return HttpTransport(base != nullptr && *base != '\0'
                             ? std::string(base)
                             : std::string("https://api.openai.com"),
                         key);
  }

  ChatResponse complete(const ChatRequest& request) override {
    httplib::Client client(base_url_);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    client.set_bearer_token_auth(api_key_);
    httplib::Result result = client.Post(
        "/v1/chat/completions", chat_completion_body(request).dump(),
        "application/json");
    if (!result)
      return {0, "connection failed: " + httplib::to_string(result.error())};
    if (result->status != 200) return {result->status, result->body};
    return {200, parse_chat_completion_body(result->body)};
  }

private:
  std::string base_url_;
  std::string api_key_;
};

}  // namespace goalkp
