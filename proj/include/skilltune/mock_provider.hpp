// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skilltune/provider.hpp"

namespace skilltune {

/// One scripted reply. All present matchers must hold; absent ones match anything.
struct MockRule {
  std::optional<Role> role;                // absent or "*" matches every role
  std::optional<int> turn;
  std::optional<int> iteration;
  std::vector<std::string> last_contains;  // substrings of the last message
  std::vector<std::string> contains;       // substrings of any message
  ChatResponse response;
};

/// Offline provider driven by an ordered rule list; the first matching rule
/// answers. Matching depends only on the request, so replies are identical
/// regardless of call order or concurrency. No match is kScriptExhausted.
///
/// Script file format:
///   {"model": "mock", "rules": [{"role": "executor", "turn": 1,
///     "last_contains": "...", "contains": ["...", "..."],
///     "response": {"content": "...", "tool_calls": [{"name": "finish", "arguments": "{}"}],
///                  "usage": {"prompt_tokens": 10, "completion_tokens": 2}}}]}
class MockProvider : public ChatProvider {
 public:
  explicit MockProvider(std::vector<MockRule> rules, std::string model = "mock");

  static MockProvider from_json(const nlohmann::json& script);
  static MockProvider from_file(const std::filesystem::path& path);

  std::string model_name() const override { return model_; }
  const std::vector<MockRule>& rules() const { return rules_; }

 protected:
  ChatResponse do_complete(const ChatRequest& request) override;

 private:
  std::vector<MockRule> rules_;
  std::string model_;
};

nlohmann::json mock_rule_to_json(const MockRule& rule);
MockRule mock_rule_from_json(const nlohmann::json& j);

}  // namespace skilltune
