// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skilltune/execution.hpp"

namespace skilltune {

enum class DiagnosisKind { kFailure, kContrastive };
std::string_view to_string(DiagnosisKind kind);

/// A per-task textual update signal.
struct Diagnosis {
  std::string task_id;
  DiagnosisKind kind = DiagnosisKind::kFailure;
  std::string text;
  std::string mechanism;  // one-line preamble, empty if the reply had none
  std::vector<std::string> cited_skill_sections;

  bool operator==(const Diagnosis&) const = default;
};

struct SkippedDiagnosis {
  std::string task_id;
  std::string reason;

  bool operator==(const SkippedDiagnosis&) const = default;
};

/// All per-task diagnoses of one iteration, in batch order, never merged.
struct DiagnosisSet {
  int iteration = 0;
  std::vector<Diagnosis> items;
  std::vector<SkippedDiagnosis> skipped;

  nlohmann::json to_json() const;
  static DiagnosisSet from_json(const nlohmann::json& j);
};

struct DiagnosisContext {
  const Environment& environment;
  ProviderSet& providers;
  const PromptLibrary& prompts;
  int iteration = 0;
  std::size_t keep_turns = 6;  // trajectory elision for prompts
  std::size_t parallelism = 1;
  Decoding decoding;
};

/// Tolerant parse: `Mechanism:` and `Skill sections:` lines are picked up
/// when present; the whole trimmed reply is the diagnosis text regardless.
Diagnosis parse_diagnosis(const std::string& task_id, DiagnosisKind kind, const std::string& reply);

/// Builds the diagnoser request for one evidence item (exposed for tests).
ChatRequest diagnosis_request(const SkillPackage& skill, const Task& task, const LossEvidence& evidence,
                              const DiagnosisContext& ctx);

/// Routes failed evidence to the failure diagnoser and contrastive evidence
/// to the contrastive diagnoser. A blank reply is retried once, then
/// kEmptyDiagnosis.
Diagnosis diagnose(const SkillPackage& skill, const Task& task, const LossEvidence& evidence,
                   const DiagnosisContext& ctx);

/// One diagnosis per evidence item. Failed items are recorded as skipped;
/// throws kBatchDiagnosisFailure only if every item fails.
/// `tasks[i]` is the task of `evidence[i]`.
DiagnosisSet diagnose_batch(const SkillPackage& skill, const std::vector<Task>& tasks,
                            const std::vector<LossEvidence>& evidence, const DiagnosisContext& ctx);

/// Prompt rendering shared by the momentum and patcher stages.
std::string render_diagnoses(const DiagnosisSet& set);

}  // namespace skilltune
