// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <thread>
#include <vector>

#include "skilltune/error.hpp"
#include "skilltune/mock_provider.hpp"

using namespace skilltune;
using nlohmann::json;

namespace {

ChatRequest request(Role role, int iteration, int turn, std::vector<std::string> contents) {
  ChatRequest req;
  req.role = role;
  req.iteration = iteration;
  req.turn = turn;
  for (auto& c : contents) req.messages.push_back({"user", c, {}, {}});
  if (role == Role::kExecutor) req.tools.push_back({"write_file", "", json::object()});
  return req;
}

MockProvider scripted() {
  return MockProvider::from_json(json::parse(R"({
    "model": "m1",
    "rules": [
      {"role": "patcher", "iteration": 3, "response": {"content": "patch three"}},
      {"role": "executor", "turn": 1, "contains": ["TASK-A", "marker"],
       "response": {"tool_calls": [{"name": "write_file", "arguments": {"path": "o", "content": "1"}}]}},
      {"role": "executor", "last_contains": "please", "response": {"content": "polite"}},
      {"role": "*", "response": {"content": "fallback", "usage": {"prompt_tokens": 3, "completion_tokens": 4}}}
    ]})"));
}

}  // namespace

TEST_CASE("first matching rule wins") {
  MockProvider m = scripted();
  CHECK(m.model_name() == "m1");
  CHECK(m.complete(request(Role::kPatcher, 3, 1, {"x"})).content == "patch three");
  CHECK(m.complete(request(Role::kPatcher, 4, 1, {"x"})).content == "fallback");
  ChatResponse r = m.complete(request(Role::kExecutor, 1, 1, {"system marker", "TASK-A"}));
  REQUIRE(r.tool_calls.size() == 1);
  CHECK(r.tool_calls[0].id == "call_1_0");
  CHECK(json::parse(r.tool_calls[0].arguments) == json{{"path", "o"}, {"content", "1"}});
  CHECK(m.complete(request(Role::kExecutor, 1, 1, {"TASK-A"})).content == "fallback");
  CHECK(m.complete(request(Role::kExecutor, 1, 2, {"TASK-A marker"})).content == "fallback");
  CHECK(m.complete(request(Role::kExecutor, 1, 2, {"please", "x"})).content == "fallback");
  CHECK(m.complete(request(Role::kExecutor, 1, 2, {"x", "please"})).content == "polite");
  CHECK(m.complete(request(Role::kMomentum, 1, 1, {"x"})).usage == Usage{3, 4});
}

TEST_CASE("no matching rule is ScriptExhausted") {
  MockProvider m = MockProvider::from_json(json::parse(R"({"rules": [{"role": "patcher", "response": {}}]})"));
  try {
    m.complete(request(Role::kExecutor, 1, 1, {"x"}));
    FAIL("expected ScriptExhausted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kScriptExhausted);
  }
}

TEST_CASE("same request gives the same response under concurrency") {
  MockProvider m = scripted();
  std::vector<std::string> seen(64);
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&, i] {
      for (int k = i; k < 64; k += 4) seen[k] = m.complete(request(Role::kPatcher, 3, 1, {"x"})).content;
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& s : seen) CHECK(s == "patch three");
}

TEST_CASE("rules round trip through JSON") {
  const MockProvider m = scripted();
  for (const MockRule& rule : m.rules()) {
    MockRule back = mock_rule_from_json(mock_rule_to_json(rule));
    CHECK(back.role == rule.role);
    CHECK(back.turn == rule.turn);
    CHECK(back.iteration == rule.iteration);
    CHECK(back.contains == rule.contains);
    CHECK(back.last_contains == rule.last_contains);
    CHECK(back.response.content == rule.response.content);
    CHECK(back.response.usage == rule.response.usage);
    REQUIRE(back.response.tool_calls.size() == rule.response.tool_calls.size());
  }
}
