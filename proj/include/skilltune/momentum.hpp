// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skilltune/diagnosis.hpp"

namespace skilltune {

enum class PatternCharacter { kOperation, kWorkflow };
/// kRetired is the explicit end state; patterns are never deleted.
enum class PatternStatus { kNew, kRecurring, kAbsorbed, kUnresolved, kRetired };

std::string_view to_string(PatternCharacter c);
std::string_view to_string(PatternStatus s);

struct EvidenceRef {
  int iteration = 0;
  std::string task_id;

  auto operator<=>(const EvidenceRef&) const = default;
};

struct Pattern {
  std::string id;  // engine-assigned slug, stable across iterations
  std::string summary;
  PatternCharacter character = PatternCharacter::kOperation;
  std::vector<int> appeared_in;  // strictly increasing
  PatternStatus status = PatternStatus::kNew;
  std::vector<EvidenceRef> evidence_refs;
  std::string skill_anchor;  // section heading or reference path; empty if none
  std::string retired_reason;

  bool operator==(const Pattern&) const = default;
};

/// The persistent momentum state after iteration `iteration`.
struct PatternMemory {
  int iteration = 0;
  std::vector<Pattern> patterns;

  const Pattern* find(std::string_view id) const;
  /// Invariant violations; empty when the memory is well formed.
  std::vector<std::string> check() const;

  nlohmann::json to_json() const;
  static PatternMemory from_json(const nlohmann::json& j);
  bool operator==(const PatternMemory&) const = default;
};

struct OverlayItem {
  std::string pattern_id;
  std::string directive;

  bool operator==(const OverlayItem&) const = default;
};

/// The focus list handed to this iteration's patch.
struct Overlay {
  int iteration = 0;
  std::vector<OverlayItem> focus;

  nlohmann::json to_json() const;
  static Overlay from_json(const nlohmann::json& j);
  bool operator==(const Overlay&) const = default;
};

struct MomentumContext {
  ProviderSet& providers;
  const PromptLibrary& prompts;
  int iteration = 0;
  Decoding decoding;
};

struct MomentumUpdate {
  PatternMemory memory;
  Overlay overlay;
  bool fallback = false;  // reply unusable after repair; memory carried over
  std::string fallback_reason;
  int attempts = 0;
};

/// Text inside the first ```json fence, else the outermost {...} span.
std::optional<std::string> extract_json_block(std::string_view reply);

/// Merges a momentum reply into `previous`. Patterns named by an existing id
/// are updated; any other ref creates a pattern with a fresh slug id.
/// Existing patterns the reply omits are carried forward unchanged.
/// Throws kSchemaViolation.
std::pair<PatternMemory, Overlay> apply_momentum_reply(const PatternMemory& previous, int iteration,
                                                       std::string_view reply);

/// Lowercase hyphenated slug of `summary`, unique against `taken`.
std::string pattern_slug(std::string_view summary, const std::vector<std::string>& taken);

std::string render_memory(const PatternMemory& memory);
std::string render_overlay(const Overlay& overlay, const PatternMemory& memory);

ChatRequest momentum_request(const PatternMemory& previous, const DiagnosisSet& diagnoses, const SkillPackage& skill,
                             const MomentumContext& ctx);

/// One momentum step. A schema violation is answered with one repair
/// request; if that also fails the previous memory is carried forward with
/// an empty overlay and `fallback` set. Throws kProviderFailure.
MomentumUpdate update_momentum(const PatternMemory& previous, const DiagnosisSet& diagnoses,
                               const SkillPackage& skill, const MomentumContext& ctx);

struct DynamicsRow {
  int iteration = 0;
  std::size_t cumulative = 0;  // distinct patterns tracked by this iteration
  std::size_t fresh = 0;       // patterns whose first appearance is this iteration
  std::size_t active = 0;      // patterns whose appeared_in contains this iteration

  bool operator==(const DynamicsRow&) const = default;
};

/// One row per memory in `history` (ordered by iteration).
std::vector<DynamicsRow> derived_metrics(const std::vector<PatternMemory>& history);

}  // namespace skilltune
