// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "skilltune/money.hpp"

namespace skilltune {

/// The five agent roles; each has its own prompt template.
enum class Role { kExecutor, kFailureDiagnoser, kContrastiveDiagnoser, kMomentum, kPatcher };
inline constexpr std::array<Role, 5> kAllRoles = {Role::kExecutor, Role::kFailureDiagnoser,
                                                  Role::kContrastiveDiagnoser, Role::kMomentum, Role::kPatcher};

/// Cost-accounting stage a request is charged to.
enum class Stage { kExecution, kDiagnosis, kMomentum, kPatch, kEvaluation };
inline constexpr std::array<Stage, 5> kAllStages = {Stage::kExecution, Stage::kDiagnosis, Stage::kMomentum,
                                                    Stage::kPatch, Stage::kEvaluation};

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);
std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view name);

struct ToolSchema {
  std::string name;
  std::string description;
  nlohmann::json parameters = nlohmann::json::object();  // JSON Schema
};

/// Arguments stay opaque text; the executor parses them.
struct ToolCall {
  std::string id;
  std::string name;
  std::string arguments;

  bool operator==(const ToolCall&) const = default;
};

struct Message {
  std::string role;  // system | user | assistant | tool
  std::string content;
  std::vector<ToolCall> tool_calls;  // assistant only
  std::string tool_call_id;          // tool only
};

struct Decoding {
  double temperature = 0.0;
  int max_output_tokens = 4096;
};

struct ChatRequest {
  Role role = Role::kExecutor;
  Stage stage = Stage::kExecution;
  int iteration = 0;
  int turn = 1;  // executor turn, or attempt number for single-shot roles
  std::vector<Message> messages;
  std::vector<ToolSchema> tools;
  Decoding decoding;
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  Usage& operator+=(const Usage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
  friend Usage operator+(Usage a, const Usage& b) { return a += b; }
  bool operator==(const Usage&) const = default;
};

struct ChatResponse {
  std::string content;
  std::vector<ToolCall> tool_calls;
  Usage usage;
};

struct UsageRecord {
  Role role;
  Stage stage;
  int iteration;
  std::string model;
  Usage usage;
};

/// Append-only, thread-safe sink of every completed provider call.
class UsageLog {
 public:
  void append(UsageRecord record);
  std::vector<UsageRecord> records() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<UsageRecord> records_;
};

/// Chat-completion backend. `complete` is the only entry point: it checks the
/// request, delegates to the backend, logs usage, then rejects responses that
/// call tools the request did not offer.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;

  ChatResponse complete(const ChatRequest& request);

  virtual std::string model_name() const = 0;
  void set_usage_log(std::shared_ptr<UsageLog> log) { log_ = std::move(log); }
  const std::shared_ptr<UsageLog>& usage_log() const { return log_; }

 protected:
  virtual ChatResponse do_complete(const ChatRequest& request) = 0;

 private:
  std::shared_ptr<UsageLog> log_;
};

/// Role -> backend binding. The default binds one backend to all roles.
class ProviderSet {
 public:
  ProviderSet() = default;
  explicit ProviderSet(std::shared_ptr<ChatProvider> shared);

  void bind(Role role, std::shared_ptr<ChatProvider> provider);
  ChatProvider& operator[](Role role) const;
  /// Attaches one log to every distinct bound backend.
  void set_usage_log(const std::shared_ptr<UsageLog>& log);

 private:
  std::array<std::shared_ptr<ChatProvider>, kAllRoles.size()> by_role_;
};

/// USD per one million tokens; at most six decimals so costs stay exact.
struct Price {
  Money prompt_per_million;
  Money completion_per_million;
};

/// Prices looked up by role name, then model name, then "default".
class PriceTable {
 public:
  static PriceTable from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  void set(std::string key, Price price);
  std::optional<Price> lookup(std::string_view key) const;
  bool empty() const { return prices_.empty(); }

 private:
  std::map<std::string, Price, std::less<>> prices_;
};

Money cost_of(const Usage& usage, const Price& price);
/// Tries each key in order, then "default". Throws kUnknownModel.
Money cost_of(const Usage& usage, const PriceTable& prices, std::initializer_list<std::string_view> keys);

/// Substitutes `{{name}}` placeholders in one pass. Throws
/// kUnboundPlaceholder; bindings that no placeholder uses are reported in
/// `unused` (and logged) but are not an error.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& bindings,
                            std::vector<std::string>* unused = nullptr);

/// Placeholder names in order of first appearance.
std::vector<std::string> template_placeholders(std::string_view tmpl);

}  // namespace skilltune
