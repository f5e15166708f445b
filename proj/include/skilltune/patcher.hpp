// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "skilltune/momentum.hpp"

namespace skilltune {

struct ReplaceBody {
  std::string text;
  bool operator==(const ReplaceBody&) const = default;
};
struct UpsertResource {
  std::string path;
  std::string text;
  bool operator==(const UpsertResource&) const = default;
};
struct DeleteResource {
  std::string path;
  bool operator==(const DeleteResource&) const = default;
};
struct ReplaceHeaderField {
  std::string key;
  std::string value;
  bool operator==(const ReplaceHeaderField&) const = default;
};

/// Whole-file edits; layer routing is explicit in the edit type.
using Edit = std::variant<ReplaceBody, UpsertResource, DeleteResource, ReplaceHeaderField>;

struct PatchSet {
  int iteration = 0;
  std::vector<Edit> edits;

  nlohmann::json to_json() const;
  static PatchSet from_json(const nlohmann::json& j);
  bool operator==(const PatchSet&) const = default;
};

/// Routing and consistency problems of `patch` against `skill`; empty if valid.
std::vector<std::string> check_patch(const PatchSet& patch, const SkillPackage& skill);

/// Parses the patcher's fenced-JSON reply and checks it. Throws kUnparseablePatch.
PatchSet parse_patch_reply(std::string_view reply, const SkillPackage& skill, int iteration);

/// Returns a new package; `skill` is never modified. Untouched files are
/// carried over unchanged. Throws kDeleteOfMissingResource or kResultInvalid.
SkillPackage apply_patch(const SkillPackage& skill, const PatchSet& patch);

struct PatchMagnitude {
  std::size_t words_added = 0;
  std::size_t words_removed = 0;
  std::size_t lines_added = 0;
  std::size_t lines_removed = 0;
  std::size_t chars_added = 0;
  std::size_t chars_removed = 0;

  bool operator==(const PatchMagnitude&) const = default;
};

/// Token-level LCS diff per file over the union of both trees (SKILL.md as
/// a whole file, plus every reference). Created files count fully as added,
/// deleted files fully as removed.
PatchMagnitude patch_magnitude(const SkillPackage& before, const SkillPackage& after);

struct PatchContext {
  ProviderSet& providers;
  const PromptLibrary& prompts;
  int iteration = 0;
  Decoding decoding;
};

/// Rendered patcher prompt. Without memory/overlay (momentum disabled) the
/// momentum block is left out entirely.
std::string render_patcher_prompt(const SkillPackage& skill, const DiagnosisSet& diagnoses, const PatternMemory* memory,
                                  const Overlay* overlay, const PatchContext& ctx);

struct PatchProposal {
  PatchSet patch;
  bool skipped = false;  // unparseable after repair; patch is empty
  std::string skip_reason;
  int attempts = 0;
};

/// Asks the patcher for an edit set. A bad reply is answered with one repair
/// request; a second failure yields an empty, skipped patch.
/// Throws kProviderFailure.
PatchProposal propose_patch(const SkillPackage& skill, const DiagnosisSet& diagnoses, const PatternMemory* memory,
                            const Overlay* overlay, const PatchContext& ctx);

}  // namespace skilltune
