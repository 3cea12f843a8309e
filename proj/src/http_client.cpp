#include <httplib.h>

#include <cstdlib>
#include <regex>

#include "dagmath/error.hpp"
#include "dagmath/ingestion.hpp"

namespace dagmath {
namespace {

using nlohmann::json;

class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(const EndpointConfig& config) : config_(config) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config.base_url, m, url_re)) {
      throw Error(ErrorCode::kConfigError, "base_url must look like http(s)://host[:port][/path]");
    }
    origin_ = m[1];
    std::string prefix = m[2];
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    path_ = prefix.ends_with("/chat/completions") ? prefix : prefix + "/chat/completions";

    const char* key = std::getenv(config.api_key_env.c_str());
    if (!key || !*key) {
      throw EndpointError(ErrorCode::kAuthFailure, false,
                          "environment variable " + config.api_key_env + " is not set");
    }
    key_ = key;
  }

  std::string complete(const ChatRequest& request) override {
    httplib::Client cli(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    cli.set_connection_timeout(std::min<std::chrono::seconds>(secs, std::chrono::seconds(30)));
    cli.set_read_timeout(config_.timeout);
    cli.set_write_timeout(config_.timeout);
    cli.set_bearer_token_auth(key_);

    auto res = cli.Post(path_, request.to_json().dump(), "application/json");
    if (!res) {
      throw EndpointError(ErrorCode::kTransportError, true, httplib::to_string(res.error()));
    }
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw EndpointError(ErrorCode::kAuthFailure, false, "HTTP " + std::to_string(status));
    }
    if (status == 429) throw EndpointError(ErrorCode::kRateLimited, true, "HTTP 429");
    if (status == 408 || status >= 500) {
      throw EndpointError(ErrorCode::kTransportError, true, "HTTP " + std::to_string(status));
    }
    if (status < 200 || status >= 300) {
      throw EndpointError(ErrorCode::kTransportError, false,
                          "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200));
    }
    return completion_text(res->body);
  }

 private:
  EndpointConfig config_;
  std::string origin_;
  std::string path_;
  std::string key_;
};

}  // namespace

json ChatRequest::to_json() const {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json j{{"model", model}, {"messages", msgs}, {"n", n}};
  if (temperature) j["temperature"] = *temperature;
  if (top_p) j["top_p"] = *top_p;
  if (max_tokens) j["max_tokens"] = *max_tokens;
  return j;
}

std::string completion_text(std::string_view response_body) {
  json j;
  try {
    j = json::parse(response_body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
  } catch (const json::exception& e) {
    throw EndpointError(ErrorCode::kTransportError, false, std::string("unexpected response body: ") + e.what());
  }
  throw EndpointError(ErrorCode::kTransportError, false, "response has no message content");
}

std::unique_ptr<ChatClient> make_http_client(const EndpointConfig& config) {
  config.validate();
  return std::make_unique<HttpChatClient>(config);
}

}  // namespace dagmath
