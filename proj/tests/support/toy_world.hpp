// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

// A small deterministic world for offline runs: grid aggregation tasks and a
// mock script whose executor solves a task exactly when the skill it was
// given carries the fix marker for that task's tag.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skilltune/skill_package.hpp"
#include "skilltune/tasks.hpp"

namespace skilltune::toy {

struct WorldOptions {
  std::size_t tasks = 48;
  std::vector<std::string> tags = {"sum", "max", "count"};
  /// Iteration whose patch adds the marker of a tag to the skill body.
  std::map<std::string, int> fix_iteration = {{"sum", 4}};
  int iterations = 13;
  /// Iterations without a fix upsert a short reference note.
  bool note_resources = true;
  /// Non-zero: executor outcomes of training iterations are drawn at random
  /// from this seed instead of following the fix markers.
  std::uint64_t random_outcomes_seed = 0;
};

std::string fix_marker(const std::string& tag);
std::string task_id(std::size_t index);
std::string task_tag(const WorldOptions& options, std::size_t index);

/// Writes `<dir>/<task_id>/{task.json,inputs/,golden/}` for every task.
void write_task_pool(const std::filesystem::path& dir, const WorldOptions& options);

SkillPackage initial_skill();
void write_initial_skill(const std::filesystem::path& dir);

/// The mock script as {"model": ..., "rules": [...]}.
nlohmann::json mock_script(const WorldOptions& options);
void write_mock_script(const std::filesystem::path& file, const WorldOptions& options);

/// The skill body the patcher writes at iteration t (fixes due by then).
std::string fixed_body(const WorldOptions& options, int t);

/// Writes pool, skill, script and prices under `root` and returns a config
/// pointing at them with `root/run` as run directory.
nlohmann::json write_world(const std::filesystem::path& root, const WorldOptions& options);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Price table used by the toy worlds (USD per 1M tokens).
nlohmann::json toy_prices();

}  // namespace skilltune::toy
