// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/provider.hpp"

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "skilltune/error.hpp"

namespace skilltune {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kExecutor: return "executor";
    case Role::kFailureDiagnoser: return "failure_diagnoser";
    case Role::kContrastiveDiagnoser: return "contrastive_diagnoser";
    case Role::kMomentum: return "momentum";
    case Role::kPatcher: return "patcher";
  }
  return "unknown";
}

Role role_from_string(std::string_view name) {
  for (Role r : kAllRoles) {
    if (to_string(r) == name) return r;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown role '" + std::string(name) + "'");
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kExecution: return "execution";
    case Stage::kDiagnosis: return "diagnosis";
    case Stage::kMomentum: return "momentum";
    case Stage::kPatch: return "patch";
    case Stage::kEvaluation: return "evaluation";
  }
  return "unknown";
}

Stage stage_from_string(std::string_view name) {
  for (Stage s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown stage '" + std::string(name) + "'");
}

void UsageLog::append(UsageRecord record) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(record));
}

std::vector<UsageRecord> UsageLog::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t UsageLog::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

ChatResponse ChatProvider::complete(const ChatRequest& request) {
  if (request.messages.empty()) throw Error(ErrorKind::kInvalidArgument, "chat request has no messages");
  ChatResponse response = do_complete(request);
  if (response.usage.prompt_tokens < 0 || response.usage.completion_tokens < 0) {
    throw Error(ErrorKind::kMalformedResponse, "negative token usage");
  }
  if (log_) log_->append({request.role, request.stage, request.iteration, model_name(), response.usage});
  for (const ToolCall& call : response.tool_calls) {
    bool offered = std::any_of(request.tools.begin(), request.tools.end(),
                               [&](const ToolSchema& t) { return t.name == call.name; });
    if (!offered) throw Error(ErrorKind::kMalformedResponse, "call to unknown tool '" + call.name + "'");
  }
  return response;
}

ProviderSet::ProviderSet(std::shared_ptr<ChatProvider> shared) { by_role_.fill(shared); }

void ProviderSet::bind(Role role, std::shared_ptr<ChatProvider> provider) {
  by_role_[static_cast<std::size_t>(role)] = std::move(provider);
}

ChatProvider& ProviderSet::operator[](Role role) const {
  const auto& p = by_role_[static_cast<std::size_t>(role)];
  if (!p) throw Error(ErrorKind::kInvalidArgument, "no provider bound for role " + std::string(to_string(role)));
  return *p;
}

void ProviderSet::set_usage_log(const std::shared_ptr<UsageLog>& log) {
  std::set<ChatProvider*> seen;
  for (const auto& p : by_role_) {
    if (p && seen.insert(p.get()).second) p->set_usage_log(log);
  }
}

namespace {

Money parse_price(const nlohmann::json& v) {
  Money m = v.is_string() ? Money::parse(v.get<std::string>()) : Money::parse(v.dump());
  if (m.units() < 0 || m.units() % 1'000'000 != 0) {
    throw Error(ErrorKind::kInvalidArgument, "price must be >= 0 with at most six decimals: " + v.dump());
  }
  return m;
}

}  // namespace

PriceTable PriceTable::from_json(const nlohmann::json& j) {
  PriceTable table;
  if (j.is_null()) return table;
  if (!j.is_object()) throw Error(ErrorKind::kInvalidArgument, "price table must be an object");
  for (const auto& [key, v] : j.items()) {
    if (!v.contains("prompt") || !v.contains("completion")) {
      throw Error(ErrorKind::kInvalidArgument, "price '" + key + "' needs prompt and completion");
    }
    table.set(key, {parse_price(v.at("prompt")), parse_price(v.at("completion"))});
  }
  return table;
}

nlohmann::json PriceTable::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, p] : prices_) {
    j[key] = {{"prompt", p.prompt_per_million.to_string()}, {"completion", p.completion_per_million.to_string()}};
  }
  return j;
}

void PriceTable::set(std::string key, Price price) { prices_[std::move(key)] = price; }

std::optional<Price> PriceTable::lookup(std::string_view key) const {
  auto it = prices_.find(key);
  if (it == prices_.end()) return std::nullopt;
  return it->second;
}

Money cost_of(const Usage& usage, const Price& price) {
  // Pico-USD per million tokens divided by 1e6 is pico-USD per token, exact by construction.
  const std::int64_t per_prompt = price.prompt_per_million.units() / 1'000'000;
  const std::int64_t per_completion = price.completion_per_million.units() / 1'000'000;
  return Money::from_units(usage.prompt_tokens * per_prompt + usage.completion_tokens * per_completion);
}

Money cost_of(const Usage& usage, const PriceTable& prices, std::initializer_list<std::string_view> keys) {
  for (std::string_view key : keys) {
    if (auto p = prices.lookup(key)) return cost_of(usage, *p);
  }
  if (auto p = prices.lookup("default")) return cost_of(usage, *p);
  std::string tried;
  for (std::string_view key : keys) tried += std::string(tried.empty() ? "" : ", ") + std::string(key);
  throw Error(ErrorKind::kUnknownModel, "no price for [" + tried + "] and no default");
}

namespace {

struct Placeholder {
  std::size_t begin;
  std::size_t end;  // one past the closing braces
  std::string name;
};

std::vector<Placeholder> scan_placeholders(std::string_view tmpl) {
  std::vector<Placeholder> out;
  std::size_t pos = 0;
  while ((pos = tmpl.find("{{", pos)) != std::string_view::npos) {
    std::size_t close = tmpl.find("}}", pos + 2);
    if (close == std::string_view::npos) break;
    std::string_view inner = tmpl.substr(pos + 2, close - pos - 2);
    while (!inner.empty() && inner.front() == ' ') inner.remove_prefix(1);
    while (!inner.empty() && inner.back() == ' ') inner.remove_suffix(1);
    bool ident = !inner.empty() && std::all_of(inner.begin(), inner.end(), [](char c) {
      return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    });
    if (ident) {
      out.push_back({pos, close + 2, std::string(inner)});
      pos = close + 2;
    } else {
      pos += 2;
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> template_placeholders(std::string_view tmpl) {
  std::vector<std::string> names;
  for (const Placeholder& p : scan_placeholders(tmpl)) {
    if (std::find(names.begin(), names.end(), p.name) == names.end()) names.push_back(p.name);
  }
  return names;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& bindings,
                            std::vector<std::string>* unused) {
  std::vector<Placeholder> holes = scan_placeholders(tmpl);
  std::set<std::string> used;
  std::string out;
  std::size_t cursor = 0;
  for (const Placeholder& p : holes) {
    auto it = bindings.find(p.name);
    if (it == bindings.end()) throw Error(ErrorKind::kUnboundPlaceholder, p.name);
    out.append(tmpl.substr(cursor, p.begin - cursor));
    out += it->second;
    used.insert(p.name);
    cursor = p.end;
  }
  out.append(tmpl.substr(cursor));
  std::vector<std::string> idle;
  for (const auto& [name, value] : bindings) {
    if (!used.contains(name)) idle.push_back(name);
  }
  if (!idle.empty()) {
    for (const std::string& name : idle) spdlog::debug("UnusedBindingWarning: '{}' is not referenced", name);
    if (unused) *unused = std::move(idle);
  } else if (unused) {
    unused->clear();
  }
  return out;
}

}  // namespace skilltune
