// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/mock_provider.hpp"

#include <algorithm>

#include "skilltune/error.hpp"
#include "skilltune/io.hpp"

namespace skilltune {

namespace {

std::vector<std::string> string_or_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  const auto& v = j.at(key);
  if (v.is_string()) return {v.get<std::string>()};
  return v.get<std::vector<std::string>>();
}

bool matches(const MockRule& rule, const ChatRequest& req) {
  if (rule.role && *rule.role != req.role) return false;
  if (rule.turn && *rule.turn != req.turn) return false;
  if (rule.iteration && *rule.iteration != req.iteration) return false;
  const std::string& last = req.messages.back().content;
  for (const std::string& needle : rule.last_contains) {
    if (last.find(needle) == std::string::npos) return false;
  }
  for (const std::string& needle : rule.contains) {
    bool found = std::any_of(req.messages.begin(), req.messages.end(),
                             [&](const Message& m) { return m.content.find(needle) != std::string::npos; });
    if (!found) return false;
  }
  return true;
}

}  // namespace

MockRule mock_rule_from_json(const nlohmann::json& j) {
  MockRule rule;
  if (j.contains("role") && j.at("role") != "*") rule.role = role_from_string(j.at("role").get<std::string>());
  if (j.contains("turn")) rule.turn = j.at("turn").get<int>();
  if (j.contains("iteration")) rule.iteration = j.at("iteration").get<int>();
  rule.last_contains = string_or_list(j, "last_contains");
  rule.contains = string_or_list(j, "contains");
  const nlohmann::json& r = j.at("response");
  rule.response.content = r.value("content", "");
  if (r.contains("tool_calls")) {
    for (const auto& call : r.at("tool_calls")) {
      const auto& args = call.contains("arguments") ? call.at("arguments") : nlohmann::json("{}");
      rule.response.tool_calls.push_back(
          {call.value("id", ""), call.at("name").get<std::string>(), args.is_string() ? args.get<std::string>() : args.dump()});
    }
  }
  if (r.contains("usage")) {
    rule.response.usage.prompt_tokens = r.at("usage").value("prompt_tokens", 0);
    rule.response.usage.completion_tokens = r.at("usage").value("completion_tokens", 0);
  }
  return rule;
}

nlohmann::json mock_rule_to_json(const MockRule& rule) {
  nlohmann::json j;
  j["role"] = rule.role ? std::string(to_string(*rule.role)) : "*";
  if (rule.turn) j["turn"] = *rule.turn;
  if (rule.iteration) j["iteration"] = *rule.iteration;
  if (!rule.last_contains.empty()) j["last_contains"] = rule.last_contains;
  if (!rule.contains.empty()) j["contains"] = rule.contains;
  nlohmann::json calls = nlohmann::json::array();
  for (const ToolCall& c : rule.response.tool_calls) {
    nlohmann::json call = {{"name", c.name}, {"arguments", c.arguments}};
    if (!c.id.empty()) call["id"] = c.id;
    calls.push_back(std::move(call));
  }
  j["response"] = {{"content", rule.response.content},
                   {"tool_calls", calls},
                   {"usage",
                    {{"prompt_tokens", rule.response.usage.prompt_tokens},
                     {"completion_tokens", rule.response.usage.completion_tokens}}}};
  return j;
}

MockProvider::MockProvider(std::vector<MockRule> rules, std::string model)
    : rules_(std::move(rules)), model_(std::move(model)) {}

MockProvider MockProvider::from_json(const nlohmann::json& script) {
  std::vector<MockRule> rules;
  try {
    for (const auto& r : script.at("rules")) rules.push_back(mock_rule_from_json(r));
    return MockProvider(std::move(rules), script.value("model", "mock"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, std::string("bad mock script: ") + e.what());
  }
}

MockProvider MockProvider::from_file(const std::filesystem::path& path) { return from_json(read_json(path)); }

ChatResponse MockProvider::do_complete(const ChatRequest& request) {
  for (const MockRule& rule : rules_) {
    if (!matches(rule, request)) continue;
    ChatResponse out = rule.response;
    for (std::size_t k = 0; k < out.tool_calls.size(); ++k) {
      if (out.tool_calls[k].id.empty()) {
        out.tool_calls[k].id = "call_" + std::to_string(request.turn) + "_" + std::to_string(k);
      }
    }
    return out;
  }
  throw Error(ErrorKind::kScriptExhausted, "no rule matches role=" + std::string(to_string(request.role)) +
                                               " iteration=" + std::to_string(request.iteration) +
                                               " turn=" + std::to_string(request.turn));
}

}  // namespace skilltune
