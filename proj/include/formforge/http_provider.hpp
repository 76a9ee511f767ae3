#pragma once

// OpenAI-style chat-completion provider plus the JSON gateway config loader.
// Keys come only from FORMFORGE_KEY_<PROVIDER> environment variables.

#include <cstdlib>
#include <fstream>
#include <map>
#include <string>

#include "httplib.h"
#include "json.hpp"

#include "formforge/cassette.hpp"
#include "formforge/gateway.hpp"

namespace formforge {

struct ProviderConfig {
  std::string name;
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;     // optional default model name
  std::map<std::string, std::string> headers;
  RateLimit rate_limit;
};

/// FORMFORGE_KEY_ followed by the provider name, uppercased, with every
/// non-alphanumeric character replaced by '_'.
inline std::string credential_env_var(std::string_view provider) {
  std::string out = "FORMFORGE_KEY_";
  for (char c : provider) {
    auto u = static_cast<unsigned char>(c);
    out += std::isalnum(u) ? static_cast<char>(std::toupper(u)) : '_';
  }
  return out;
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing '/'
};

inline ParsedUrl split_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw Error("URL needs a scheme: " + std::string(url));
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  out.origin = std::string(url.substr(0, path_start));
  out.path = path_start == std::string_view::npos ? "" : std::string(url.substr(path_start));
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(ProviderConfig cfg) : cfg_(std::move(cfg)), url_(split_url(cfg_.base_url)) {}

  AttemptResult attempt(const LlmRequest& req) override {
    const char* key = std::getenv(credential_env_var(cfg_.name).c_str());
    if (!key || !*key)
      return GatewayError{GatewayError::Kind::Auth, credential_env_var(cfg_.name) + " is not set", 1};

    httplib::Client cli(url_.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(req.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(req.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
    for (const auto& [k, v] : cfg_.headers) headers.emplace(k, v);

    nlohmann::json body;
    body["model"] = req.model.model.empty() ? cfg_.model : req.model.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}});

    auto res = cli.Post(url_.path + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
      auto err = res.error();
      auto kind = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                      ? GatewayError::Kind::Timeout
                      : GatewayError::Kind::Transport;
      return GatewayError{kind, httplib::to_string(err), 1};
    }
    if (res->status == 401 || res->status == 403)
      return GatewayError{GatewayError::Kind::Auth, "HTTP " + std::to_string(res->status), 1};
    if (res->status == 429) return GatewayError{GatewayError::Kind::RateLimited, "HTTP 429", 1};
    if (res->status == 408 || res->status == 504)
      return GatewayError{GatewayError::Kind::Timeout, "HTTP " + std::to_string(res->status), 1};
    if (res->status != 200)
      return GatewayError{GatewayError::Kind::Transport, "HTTP " + std::to_string(res->status), 1};

    auto j = nlohmann::json::parse(res->body, nullptr, false);
    try {
      if (!j.is_discarded()) return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
    return GatewayError{GatewayError::Kind::Transport, "response has no choices[0].message.content", 1};
  }

 private:
  ProviderConfig cfg_;
  ParsedUrl url_;
};

/// {"providers": [{"name", "base_url", "model"?, "headers"?, "rate_limit"?: {"requests", "interval_ms"}}]}
inline std::vector<ProviderConfig> parse_gateway_config(const nlohmann::json& j) {
  std::vector<ProviderConfig> out;
  if (!j.contains("providers")) return out;
  if (!j["providers"].is_array()) throw Error("gateway config: \"providers\" must be an array");
  for (const auto& p : j["providers"]) {
    ProviderConfig c;
    try {
      c.name = p.at("name").get<std::string>();
      c.base_url = p.at("base_url").get<std::string>();
      c.model = p.value("model", "");
      if (p.contains("headers")) c.headers = p["headers"].get<std::map<std::string, std::string>>();
      if (p.contains("api_key") || p.contains("key"))
        throw Error("gateway config: credentials belong in " + credential_env_var(c.name) + ", not the file");
      if (p.contains("rate_limit")) {
        c.rate_limit.requests = p["rate_limit"].value("requests", 0);
        c.rate_limit.interval = Millis(p["rate_limit"].value("interval_ms", 60'000));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("gateway config: ") + e.what());
    }
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<ProviderConfig> load_gateway_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open gateway config: " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error("gateway config is not valid JSON: " + path);
  return parse_gateway_config(j);
}

inline void add_http_providers(LlmGateway& gateway, const std::vector<ProviderConfig>& configs) {
  for (const auto& c : configs) gateway.add_provider(c.name, std::make_shared<HttpProvider>(c), c.rate_limit);
}

}  // namespace formforge
