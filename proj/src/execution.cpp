// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/execution.hpp"

#include <algorithm>
#include <sstream>

#include "skilltune/error.hpp"
#include "skilltune/io.hpp"

namespace skilltune {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kMaxRenderedResult = 4000;

json usage_to_json(const Usage& u) { return {{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}}; }

Usage usage_from_json(const json& j) { return {j.value("prompt_tokens", std::int64_t{0}), j.value("completion_tokens", std::int64_t{0})}; }

std::string clip(const std::string& s, std::size_t limit) {
  if (s.size() <= limit) return s;
  return s.substr(0, limit) + "\n[... " + std::to_string(s.size() - limit) + " more bytes]";
}

std::string resource_display_name(std::string_view path) {
  std::string_view name = path.substr(kReferencesDir.size() + 1);
  return std::string(name.substr(0, name.size() - 3));
}

const Resource* resolve_reference(const SkillPackage& skill, std::string name) {
  if (name.rfind("references/", 0) == 0) name = name.substr(11);
  if (name.size() > 3 && name.compare(name.size() - 3, 3, ".md") == 0) name.resize(name.size() - 3);
  return skill.find_resource("references/" + name + ".md");
}

// Workspace paths must stay inside the workspace.
std::optional<fs::path> workspace_path(const fs::path& workspace, const std::string& rel) {
  fs::path p(rel);
  if (rel.empty() || p.is_absolute()) return std::nullopt;
  for (const auto& part : p) {
    if (part == "..") return std::nullopt;
  }
  return workspace / p;
}

struct ToolOutcome {
  std::string result;
  bool finished = false;
};

ToolOutcome run_tool(const ToolCall& call, const SkillPackage& skill, const fs::path& workspace) {
  json args;
  try {
    args = call.arguments.empty() ? json::object() : json::parse(call.arguments);
  } catch (const json::parse_error&) {
    return {"error: arguments are not a JSON object"};
  }
  if (args.is_null()) args = json::object();
  if (!args.is_object()) return {"error: arguments are not a JSON object"};
  auto str_arg = [&](const char* key) -> std::optional<std::string> {
    if (!args.contains(key) || !args.at(key).is_string()) return std::nullopt;
    return args.at(key).get<std::string>();
  };

  if (call.name == kReadReferenceTool) {
    auto name = str_arg("name");
    if (!name) return {"error: read_reference needs a string \"name\""};
    if (const Resource* r = resolve_reference(skill, *name)) return {r->text};
    std::string available;
    for (const Resource& r : skill.resources) available += (available.empty() ? "" : ", ") + resource_display_name(r.path);
    return {"error: no reference named '" + *name + "'; available: " + (available.empty() ? "none" : available)};
  }
  if (call.name == "read_file") {
    auto rel = str_arg("path");
    if (!rel) return {"error: read_file needs a string \"path\""};
    auto p = workspace_path(workspace, *rel);
    if (!p) return {"error: path must be relative to the workspace"};
    if (!fs::is_regular_file(*p)) return {"error: no such file '" + *rel + "'"};
    return {read_text(*p)};
  }
  if (call.name == "write_file") {
    auto rel = str_arg("path");
    auto content = str_arg("content");
    if (!rel || !content) return {"error: write_file needs string \"path\" and \"content\""};
    auto p = workspace_path(workspace, *rel);
    if (!p) return {"error: path must be relative to the workspace"};
    write_text(*p, *content);
    return {"wrote " + std::to_string(content->size()) + " bytes to " + *rel};
  }
  if (call.name == "finish") return {"ok", true};
  return {"error: unknown tool '" + call.name + "'"};
}

}  // namespace

Usage Trajectory::total_usage() const {
  Usage total;
  for (const Turn& t : turns) total += t.usage;
  return total;
}

std::size_t Trajectory::count_calls(std::string_view tool) const {
  std::size_t n = 0;
  for (const Turn& t : turns) {
    n += static_cast<std::size_t>(std::count_if(t.tool_calls.begin(), t.tool_calls.end(),
                                                [&](const ToolInvocation& c) { return c.name == tool; }));
  }
  return n;
}

std::string trajectory_to_jsonl(const Trajectory& t) {
  std::string out = json{{"type", "header"}, {"task_id", t.task_id}, {"skill_iteration", t.skill_iteration}}.dump() + "\n";
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    const Turn& turn = t.turns[i];
    json calls = json::array();
    for (const ToolInvocation& c : turn.tool_calls) {
      calls.push_back({{"id", c.id}, {"name", c.name}, {"arguments", c.arguments}, {"result", c.result}});
    }
    out += json{{"type", "turn"}, {"index", i + 1}, {"model_message", turn.model_message}, {"tool_calls", calls},
                {"usage", usage_to_json(turn.usage)}}
               .dump() +
           "\n";
  }
  out += json{{"type", "outcome"},
              {"success", t.final_outcome.success},
              {"feedback", t.final_outcome.feedback},
              {"truncated", t.truncated},
              {"error", t.error}}
             .dump() +
         "\n";
  return out;
}

Trajectory trajectory_from_jsonl(std::string_view text) {
  Trajectory t;
  bool saw_header = false;
  bool saw_outcome = false;
  std::istringstream in{std::string(text)};
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      const std::string type = j.at("type");
      if (type == "header") {
        t.task_id = j.at("task_id");
        t.skill_iteration = j.at("skill_iteration");
        saw_header = true;
      } else if (type == "turn") {
        Turn turn;
        turn.model_message = j.at("model_message");
        for (const auto& c : j.at("tool_calls")) {
          turn.tool_calls.push_back({c.at("id"), c.at("name"), c.at("arguments"), c.at("result")});
        }
        turn.usage = usage_from_json(j.at("usage"));
        t.turns.push_back(std::move(turn));
      } else if (type == "outcome") {
        t.final_outcome = {j.at("success").get<bool>(), j.at("feedback").get<std::string>()};
        t.truncated = j.at("truncated");
        t.error = j.value("error", "");
        saw_outcome = true;
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kCorruptRunDir, std::string("bad trajectory line: ") + e.what());
  }
  if (!saw_header || !saw_outcome) throw Error(ErrorKind::kCorruptRunDir, "trajectory lacks header or outcome");
  return t;
}

void save_trajectory(const Trajectory& t, const fs::path& file) { write_text(file, trajectory_to_jsonl(t)); }

Trajectory load_trajectory(const fs::path& file) { return trajectory_from_jsonl(read_text(file)); }

std::string render_trajectory(const Trajectory& t, std::size_t keep) {
  std::ostringstream out;
  auto render_turn = [&](std::size_t i) {
    const Turn& turn = t.turns[i];
    out << "[turn " << i + 1 << "]\n";
    if (!turn.model_message.empty()) out << "assistant: " << clip(turn.model_message, kMaxRenderedResult) << "\n";
    for (const ToolInvocation& c : turn.tool_calls) {
      out << "call " << c.name << "(" << clip(c.arguments, kMaxRenderedResult) << ")\n";
      out << "result: " << clip(c.result, kMaxRenderedResult) << "\n";
    }
  };
  const std::size_t n = t.turns.size();
  if (keep == 0 || n <= 2 * keep) {
    for (std::size_t i = 0; i < n; ++i) render_turn(i);
  } else {
    for (std::size_t i = 0; i < keep; ++i) render_turn(i);
    out << "[... " << n - 2 * keep << " turns omitted ...]\n";
    for (std::size_t i = n - keep; i < n; ++i) render_turn(i);
  }
  out << "[end] " << (t.final_outcome.success ? "success" : "failure");
  if (t.truncated) out << " (turn limit reached before finish)";
  if (!t.error.empty()) out << " (error: " << t.error << ")";
  out << "\n";
  return out.str();
}

std::vector<ToolSchema> executor_tools(const SkillPackage& skill) {
  auto object = [](json props, std::vector<std::string> required) {
    return json{{"type", "object"}, {"properties", std::move(props)}, {"required", std::move(required)}};
  };
  json str = {{"type", "string"}};
  std::vector<ToolSchema> tools;
  if (!skill.resources.empty()) {
    tools.push_back({std::string(kReadReferenceTool), "Return the content of one reference file of the loaded skill.",
                     object({{"name", str}}, {"name"})});
  }
  tools.push_back({"read_file", "Return the content of a workspace file.", object({{"path", str}}, {"path"})});
  tools.push_back({"write_file", "Create or overwrite a workspace file.",
                   object({{"path", str}, {"content", str}}, {"path", "content"})});
  tools.push_back({"finish", "End the task after the output has been written.", object(json::object(), {})});
  return tools;
}

std::string render_executor_prompt(const SkillPackage& skill, const PromptLibrary& prompts) {
  std::string refs;
  for (const Resource& r : skill.resources) refs += "- " + resource_display_name(r.path) + "\n";
  if (refs.empty()) refs = "(none)\n";
  return render_template(prompts.get("executor"), {{"skill_header", skill.header.serialize()},
                                                   {"skill_body", skill.body},
                                                   {"reference_list", refs}});
}

Trajectory execute(const SkillPackage& skill, const Task& task, const ExecutionContext& ctx) {
  if (ctx.limits.max_turns < 1) throw Error(ErrorKind::kInvalidArgument, "max_turns must be >= 1");
  ctx.environment.prepare_workspace(task, ctx.workspace);

  Trajectory traj;
  traj.task_id = task.id;
  traj.skill_iteration = ctx.skill_iteration;

  ChatRequest req;
  req.role = Role::kExecutor;
  req.stage = ctx.stage;
  req.iteration = ctx.iteration;
  req.tools = executor_tools(skill);
  req.decoding = ctx.limits.decoding;
  req.messages.push_back({"system", render_executor_prompt(skill, ctx.prompts), {}, {}});
  req.messages.push_back({"user", ctx.environment.present(task), {}, {}});

  bool finished = false;
  for (int turn_no = 1; turn_no <= ctx.limits.max_turns && !finished; ++turn_no) {
    req.turn = turn_no;
    ChatResponse resp;
    try {
      resp = ctx.provider.complete(req);
    } catch (const Error& e) {
      traj.error = e.what();
      break;
    }
    Turn turn{resp.content, {}, resp.usage};
    req.messages.push_back({"assistant", resp.content, resp.tool_calls, {}});
    for (const ToolCall& call : resp.tool_calls) {
      ToolOutcome out = run_tool(call, skill, ctx.workspace);
      finished = finished || out.finished;
      turn.tool_calls.push_back({call.id, call.name, call.arguments, out.result});
      req.messages.push_back({"tool", out.result, {}, call.id});
    }
    if (resp.tool_calls.empty()) {
      req.messages.push_back({"user", "Continue with a tool call. Call finish() once the output is written.", {}, {}});
    }
    traj.turns.push_back(std::move(turn));
  }
  traj.truncated = !finished && traj.error.empty() && static_cast<int>(traj.turns.size()) == ctx.limits.max_turns;

  if (!traj.error.empty()) {
    traj.final_outcome = {false, "execution aborted by provider failure: " + traj.error};
    return traj;
  }
  try {
    traj.final_outcome = ctx.environment.evaluate(task, ctx.workspace);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kMissingOutputArtifact && e.kind() != ErrorKind::kUnreadableArtifact) throw;
    traj.final_outcome = {false, e.what()};
  }
  return traj;
}

int binary_loss(const Outcome& outcome) { return outcome.success ? 0 : 1; }

const Trajectory& LossEvidence::current() const {
  return std::visit([](const auto& b) -> const Trajectory& { return b.current; }, branch);
}

void BaselineStore::put(Trajectory t) {
  std::string id = t.task_id;
  by_task_.insert_or_assign(std::move(id), std::move(t));
}

const Trajectory* BaselineStore::find(const std::string& task_id) const {
  auto it = by_task_.find(task_id);
  return it == by_task_.end() ? nullptr : &it->second;
}

void BaselineStore::save(const fs::path& dir) const {
  for (const auto& [id, t] : by_task_) save_trajectory(t, dir / (id + ".jsonl"));
}

BaselineStore BaselineStore::load(const fs::path& dir) {
  BaselineStore store;
  if (!fs::is_directory(dir)) return store;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) store.put(load_trajectory(f));
  return store;
}

LossEvidence build_evidence(const std::string& task_id, const Trajectory& current, const BaselineStore& baseline) {
  if (!current.final_outcome.success) return {task_id, FailedEvidence{current, current.final_outcome.feedback}};
  const Trajectory* initial = baseline.find(task_id);
  if (!initial || initial->final_outcome.success) {
    throw Error(ErrorKind::kMissingBaseline, "no initial-skill failure stored for " + task_id);
  }
  return {task_id, ContrastiveEvidence{current, *initial, initial->final_outcome.feedback}};
}

json evidence_summary(const LossEvidence& e) {
  json j = {{"task_id", e.task_id},
            {"variant", e.is_failed() ? "failed" : "contrastive_success"},
            {"current_success", e.current().final_outcome.success},
            {"current_skill_iteration", e.current().skill_iteration}};
  if (const auto* f = std::get_if<FailedEvidence>(&e.branch)) {
    j["feedback"] = f->feedback;
  } else {
    const auto& c = std::get<ContrastiveEvidence>(e.branch);
    j["initial_task_id"] = c.initial.task_id;
    j["initial_success"] = c.initial.final_outcome.success;
    j["initial_skill_iteration"] = c.initial.skill_iteration;
    j["initial_feedback"] = c.initial_feedback;
  }
  return j;
}

}  // namespace skilltune
