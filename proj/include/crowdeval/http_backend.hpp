#pragma once

#include <chrono>
#include <cstdlib>
#include <string>

#include <httplib.h>

#include "crowdeval/backends.hpp"
#include "crowdeval/util.hpp"

namespace crowdeval {

namespace detail {

struct ParsedUrl {
  bool https = false;
  std::string host;
  int port = 80;
  std::string path_prefix;
};

inline ParsedUrl parse_endpoint_url(const std::string& url) {
  ParsedUrl out;
  std::string rest = url;
  if (rest.rfind("https://", 0) == 0) {
    out.https = true;
    out.port = 443;
    rest = rest.substr(8);
  } else if (rest.rfind("http://", 0) == 0) {
    rest = rest.substr(7);
  } else {
    throw ConfigError("endpoint_url must start with http:// or https://: " + url);
  }
  std::size_t slash = rest.find('/');
  std::string host_port = slash == std::string::npos ? rest : rest.substr(0, slash);
  if (slash != std::string::npos) {
    std::string prefix = rest.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    out.path_prefix = prefix;
  }
  std::size_t colon = host_port.rfind(':');
  if (colon != std::string::npos) {
    out.host = host_port.substr(0, colon);
    try {
      out.port = std::stoi(host_port.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("endpoint_url has a malformed port: " + url);
    }
  } else {
    out.host = host_port;
  }
  if (out.host.empty()) throw ConfigError("endpoint_url has no host: " + url);
  return out;
}

}  // namespace detail

/// Chat-completion client: POST {endpoint_url}/chat/completions with a
/// bearer token from the configured env var; response text is read from
/// choices[0].message.content.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig config)
      : Backend(std::move(config)),  // base first; members read config_ below
        url_(detail::parse_endpoint_url(config_.endpoint_url)),
        gate_(config_.max_in_flight) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url_.https)
      throw ConfigError("built without TLS support; https endpoint unusable: " +
                        config_.endpoint_url);
#endif
  }

  bool is_mock() const override { return false; }

  void probe() override {
    CallContext ctx;
    ctx.role = "probe";
    SamplingParams params{0.0, 1};
    CompletionResult r = complete("ping", params, ctx);
    // Any HTTP-level response proves reachability; empty content or a
    // provider rejection of the 1-token request still reached the service.
    if (!r.ok && (r.error == CallErrorKind::Timeout ||
                  r.error == CallErrorKind::Transport ||
                  r.error == CallErrorKind::Config))
      throw BackendUnreachableError("backend \"" + config_.backend_id +
                                    "\" unreachable: " + r.error_detail);
  }

  CompletionResult complete(const std::string& prompt,
                            const SamplingParams& params,
                            const CallContext& ctx) override {
    (void)ctx;
    GateGuard guard(gate_);
    CompletionResult out;
    auto started = std::chrono::steady_clock::now();
    auto finish = [&] {
      out.latency_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
    };

    json body;
    body["model"] = config_.model_name;
    body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
      const char* key = std::getenv(config_.api_key_env.c_str());
      if (!key || !*key) {
        out.error = CallErrorKind::Config;
        out.error_detail = "env var " + config_.api_key_env + " is empty or unset";
        finish();
        return out;
      }
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto result = request(url_.path_prefix + "/chat/completions", headers,
                          body.dump());
    finish();
    if (!result) {
      auto err = result.error();
      out.error = err == httplib::Error::ConnectionTimeout
                      ? CallErrorKind::Timeout
                      : CallErrorKind::Transport;
      out.error_detail = httplib::to_string(err);
      return out;
    }

    out.http_status = result->status;
    if (result->status < 200 || result->status >= 300) {
      out.error = CallErrorKind::Provider;
      out.error_detail = "HTTP " + std::to_string(result->status) + ": " +
                         result->body.substr(0, 2000);
      return out;
    }

    json parsed = json::parse(result->body, nullptr, false);
    if (parsed.is_discarded()) {
      out.error = CallErrorKind::Provider;
      out.error_detail = "response body is not JSON";
      return out;
    }
    try {
      out.text = parsed.at("choices").at(0).at("message").at("content")
                     .get<std::string>();
    } catch (const json::exception&) {
      out.error = CallErrorKind::Provider;
      out.error_detail = "no choices[0].message.content in response";
      return out;
    }
    if (parsed.contains("usage")) out.token_usage = parsed["usage"];
    if (trim_view(out.text).empty()) {
      out.error = CallErrorKind::Empty;
      out.error_detail = "provider returned empty content";
      return out;
    }
    out.ok = true;
    return out;
  }

 private:
  httplib::Result request(const std::string& path, const httplib::Headers& headers,
                          const std::string& body) {
    // One client per request keeps this trivially thread-safe; the
    // connection setup cost is noise next to model inference time.
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    if (url_.https) {
      httplib::SSLClient client(url_.host, url_.port);
      configure(client);
      return client.Post(path, headers, body, "application/json");
    }
#endif
    httplib::Client client(url_.host, url_.port);
    configure(client);
    return client.Post(path, headers, body, "application/json");
  }

  template <typename ClientT>
  void configure(ClientT& client) {
    auto timeout = std::chrono::duration<double>(config_.timeout_s);
    client.set_connection_timeout(
        std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_read_timeout(
        std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_write_timeout(
        std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  }

  detail::ParsedUrl url_;
  InFlightGate gate_;
};

}  // namespace crowdeval
