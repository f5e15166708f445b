// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

#include "skilltune/provider.hpp"

namespace skilltune {

struct HttpProviderConfig {
  std::string endpoint = "https://api.openai.com/v1";  // base URL; "/chat/completions" is appended
  std::string model = "gpt-4.1";
  std::string api_key;
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};  // doubled after each failed attempt
  std::chrono::seconds timeout{120};

  /// Reads `endpoint`, `model`, `max_retries`, `backoff_ms`, `timeout_s` from
  /// JSON, then applies SKILLTUNE_ENDPOINT / SKILLTUNE_MODEL / SKILLTUNE_API_KEY
  /// (falling back to OPENAI_API_KEY) from the environment.
  static HttpProviderConfig from_json_and_env(const nlohmann::json& j);
};

/// OpenAI-compatible chat-completions client with tool calling.
/// Transport failures, HTTP 429 and 5xx are retried with exponential
/// backoff; other HTTP errors fail immediately.
class HttpProvider : public ChatProvider {
 public:
  explicit HttpProvider(HttpProviderConfig config);

  std::string model_name() const override { return config_.model; }

 protected:
  ChatResponse do_complete(const ChatRequest& request) override;

 private:
  HttpProviderConfig config_;
};

// Wire format, exposed for tests.
nlohmann::json to_wire(const ChatRequest& request, const std::string& model);
ChatResponse from_wire(const nlohmann::json& body);

}  // namespace skilltune
