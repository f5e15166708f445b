// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/http_provider.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "skilltune/error.hpp"

namespace skilltune {

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash
};

Url split_url(const std::string& url) {
  std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorKind::kInvalidArgument, "endpoint needs a scheme: " + url);
  std::size_t slash = url.find('/', scheme + 3);
  Url out{url.substr(0, slash), slash == std::string::npos ? "" : url.substr(slash)};
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace

HttpProviderConfig HttpProviderConfig::from_json_and_env(const nlohmann::json& j) {
  HttpProviderConfig c;
  if (j.is_object()) {
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.backoff = std::chrono::milliseconds(j.value("backoff_ms", static_cast<int>(c.backoff.count())));
    c.timeout = std::chrono::seconds(j.value("timeout_s", static_cast<int>(c.timeout.count())));
  }
  c.endpoint = env_or("SKILLTUNE_ENDPOINT", c.endpoint);
  c.model = env_or("SKILLTUNE_MODEL", c.model);
  c.api_key = env_or("SKILLTUNE_API_KEY", env_or("OPENAI_API_KEY", ""));
  return c;
}

nlohmann::json to_wire(const ChatRequest& request, const std::string& model) {
  nlohmann::json messages = nlohmann::json::array();
  for (const Message& m : request.messages) {
    nlohmann::json msg = {{"role", m.role}, {"content", m.content}};
    if (!m.tool_calls.empty()) {
      nlohmann::json calls = nlohmann::json::array();
      for (const ToolCall& c : m.tool_calls) {
        calls.push_back({{"id", c.id}, {"type", "function"}, {"function", {{"name", c.name}, {"arguments", c.arguments}}}});
      }
      msg["tool_calls"] = std::move(calls);
    }
    if (!m.tool_call_id.empty()) msg["tool_call_id"] = m.tool_call_id;
    messages.push_back(std::move(msg));
  }
  nlohmann::json body = {{"model", model},
                         {"messages", std::move(messages)},
                         {"temperature", request.decoding.temperature},
                         {"max_tokens", request.decoding.max_output_tokens}};
  if (!request.tools.empty()) {
    nlohmann::json tools = nlohmann::json::array();
    for (const ToolSchema& t : request.tools) {
      tools.push_back({{"type", "function"},
                       {"function", {{"name", t.name}, {"description", t.description}, {"parameters", t.parameters}}}});
    }
    body["tools"] = std::move(tools);
  }
  return body;
}

ChatResponse from_wire(const nlohmann::json& body) {
  try {
    ChatResponse out;
    const nlohmann::json& message = body.at("choices").at(0).at("message");
    if (message.contains("content") && message.at("content").is_string()) out.content = message.at("content");
    if (message.contains("tool_calls") && message.at("tool_calls").is_array()) {
      for (const auto& c : message.at("tool_calls")) {
        const auto& fn = c.at("function");
        const auto& args = fn.contains("arguments") ? fn.at("arguments") : nlohmann::json("{}");
        out.tool_calls.push_back({c.value("id", ""), fn.at("name").get<std::string>(),
                                  args.is_string() ? args.get<std::string>() : args.dump()});
      }
    }
    if (body.contains("usage") && body.at("usage").is_object()) {
      out.usage.prompt_tokens = body.at("usage").value("prompt_tokens", 0);
      out.usage.completion_tokens = body.at("usage").value("completion_tokens", 0);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kMalformedResponse, std::string("unexpected response shape: ") + e.what());
  }
}

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {}

ChatResponse HttpProvider::do_complete(const ChatRequest& request) {
  const Url url = split_url(config_.endpoint);
  const std::string payload = to_wire(request, config_.model).dump();
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  auto backoff = config_.backoff;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      spdlog::warn("{} request failed ({}); retry {}/{}", to_string(request.role), last_error, attempt,
                   config_.max_retries);
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(url.origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    auto result = client.Post(url.path + "/chat/completions", headers, payload, "application/json");
    if (!result) {
      last_error = httplib::to_string(result.error());
      continue;
    }
    if (result->status == 429 || result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      throw Error(ErrorKind::kTransportError, "HTTP " + std::to_string(result->status) + ": " + result->body);
    }
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::kMalformedResponse, std::string("response is not JSON: ") + e.what());
    }
    return from_wire(body);
  }
  throw Error(ErrorKind::kTransportError,
              last_error + " after " + std::to_string(config_.max_retries) + " retries");
}

}  // namespace skilltune
