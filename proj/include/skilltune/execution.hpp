// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "skilltune/prompts.hpp"
#include "skilltune/provider.hpp"
#include "skilltune/skill_package.hpp"
#include "skilltune/tasks.hpp"

namespace skilltune {

inline constexpr std::string_view kReadReferenceTool = "read_reference";

struct ToolInvocation {
  std::string id;
  std::string name;
  std::string arguments;
  std::string result;

  bool operator==(const ToolInvocation&) const = default;
};

struct Turn {
  std::string model_message;
  std::vector<ToolInvocation> tool_calls;
  Usage usage;

  bool operator==(const Turn&) const = default;
};

struct Trajectory {
  std::string task_id;
  int skill_iteration = 0;  // 0 = initial skill
  std::vector<Turn> turns;
  Outcome final_outcome;
  bool truncated = false;  // turn cap reached without finish
  std::string error;       // provider failure, if any

  Usage total_usage() const;
  std::size_t count_calls(std::string_view tool) const;
  bool operator==(const Trajectory&) const = default;
};

/// One JSON object per line: a header, one line per turn, then the outcome.
std::string trajectory_to_jsonl(const Trajectory& t);
Trajectory trajectory_from_jsonl(std::string_view text);
void save_trajectory(const Trajectory& t, const std::filesystem::path& file);
Trajectory load_trajectory(const std::filesystem::path& file);

/// Prompt rendering of a trajectory. With more than 2 * keep turns, only the
/// first and last `keep` turns are shown around an elision marker.
std::string render_trajectory(const Trajectory& t, std::size_t keep = 6);

struct ExecutionLimits {
  int max_turns = 30;
  Decoding decoding;
};

struct ExecutionContext {
  const Environment& environment;
  ChatProvider& provider;
  const PromptLibrary& prompts;
  Stage stage = Stage::kExecution;
  int iteration = 0;  // optimizer iteration the calls are charged to
  int skill_iteration = 0;
  std::filesystem::path workspace;
  ExecutionLimits limits;
};

/// read_reference is offered only when the skill has reference files.
std::vector<ToolSchema> executor_tools(const SkillPackage& skill);

/// Renders the executor system message: header and body inline, references
/// only listed by name.
std::string render_executor_prompt(const SkillPackage& skill, const PromptLibrary& prompts);

/// Runs the tool-calling loop for one task and scores the workspace.
/// Provider failures end the loop and are recorded in `error` with a failed
/// outcome. Throws kWorkspaceSetupFailure.
Trajectory execute(const SkillPackage& skill, const Task& task, const ExecutionContext& ctx);

/// 1 - success.
int binary_loss(const Outcome& outcome);

struct FailedEvidence {
  Trajectory current;  // failed under the current skill
  std::string feedback;
};

struct ContrastiveEvidence {
  Trajectory current;  // successful under the current skill
  Trajectory initial;  // failed under the initial skill
  std::string initial_feedback;
};

struct LossEvidence {
  std::string task_id;
  std::variant<FailedEvidence, ContrastiveEvidence> branch;

  bool is_failed() const { return std::holds_alternative<FailedEvidence>(branch); }
  const Trajectory& current() const;
};

/// Initial-skill failed trajectories keyed by task id.
class BaselineStore {
 public:
  void put(Trajectory t);
  const Trajectory* find(const std::string& task_id) const;
  std::size_t size() const { return by_task_.size(); }
  const std::map<std::string, Trajectory>& all() const { return by_task_; }

  void save(const std::filesystem::path& dir) const;
  static BaselineStore load(const std::filesystem::path& dir);

 private:
  std::map<std::string, Trajectory> by_task_;
};

/// Failed outcome -> FailedEvidence; success -> ContrastiveEvidence paired
/// with the stored initial failure. Throws kMissingBaseline.
LossEvidence build_evidence(const std::string& task_id, const Trajectory& current, const BaselineStore& baseline);

/// evidence.json record; trajectories are referenced, not inlined.
nlohmann::json evidence_summary(const LossEvidence& e);

}  // namespace skilltune
