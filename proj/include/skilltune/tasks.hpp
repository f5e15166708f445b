// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace skilltune {

/// A cell value of the grid environment.
using Scalar = std::variant<std::monostate, bool, std::int64_t, double, std::string>;

Scalar scalar_from_json(const nlohmann::json& j);
nlohmann::json scalar_to_json(const Scalar& s);
std::string scalar_repr(const Scalar& s);
/// Exact for strings, booleans and integers; reals within 1e-9 absolute.
bool scalar_equal(const Scalar& expected, const Scalar& actual);

struct CellRef {
  std::string sheet;
  int row = 0;  // zero-based
  int col = 0;  // zero-based

  auto operator<=>(const CellRef&) const = default;
};

/// "B3" style name of a cell, with sheet prefix: "Sheet1!B3".
std::string cell_name(const CellRef& ref);

struct CellRange {
  std::string sheet;
  int row_first = 0;
  int row_last = 0;
  int col_first = 0;
  int col_last = 0;

  bool operator==(const CellRange&) const = default;
};

/// Parses "Sheet1!A1:C4" or "A1" (sheet defaults to `default_sheet`).
CellRange parse_range(std::string_view text, std::string_view default_sheet = "Sheet1");
std::string format_range(const CellRange& range);

/// Sheets of rows of cells; the on-disk form is {"sheets": {"Sheet1": [[...], ...]}}.
using Grid = std::map<std::string, std::vector<std::vector<Scalar>>>;
Grid grid_from_json(const nlohmann::json& j);
nlohmann::json grid_to_json(const Grid& grid);
/// Missing cells read as null.
Scalar grid_at(const Grid& grid, const CellRef& ref);

struct GoldenSpec {
  std::vector<CellRange> answer_ranges;
  std::map<CellRef, Scalar> golden_grid;  // every answer-range cell
};

struct Task {
  std::string id;
  std::string instruction;
  std::map<std::string, std::string> input_files;  // workspace-relative path -> bytes
  GoldenSpec golden;
  std::vector<std::string> tags;
};

struct Outcome {
  bool success = false;
  std::string feedback;  // non-empty on failure

  bool operator==(const Outcome&) const = default;
};

/// How tasks are shown to the agent, staged on disk, and scored. The grid
/// environment is built in; other environments plug in here.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string present(const Task& task) const = 0;
  /// Throws kWorkspaceSetupFailure.
  virtual void prepare_workspace(const Task& task, const std::filesystem::path& workspace) const = 0;
  /// Throws kMissingOutputArtifact / kUnreadableArtifact.
  virtual Outcome evaluate(const Task& task, const std::filesystem::path& workspace) const = 0;
};

/// Inputs and goldens are JSON grids; the agent writes `output.json`.
class GridEnvironment : public Environment {
 public:
  static constexpr std::string_view kOutputFile = "output.json";
  static constexpr std::size_t kMaxReportedMismatches = 10;

  std::string present(const Task& task) const override;
  void prepare_workspace(const Task& task, const std::filesystem::path& workspace) const override;
  Outcome evaluate(const Task& task, const std::filesystem::path& workspace) const override;

  /// Scores an already-parsed output grid.
  static Outcome compare(const Task& task, const Grid& output);
};

/// Task directory: task.json (id, instruction, answer_ranges, tags),
/// inputs/ (copied into the workspace under inputs/), golden/output.json.
Task load_task(const std::filesystem::path& dir);
void save_task(const Task& task, const Grid& golden, const std::filesystem::path& dir);
/// Every subdirectory holding a task.json, ordered by directory name.
std::vector<Task> load_task_pool(const std::filesystem::path& dir);

struct SplitSizes {
  std::size_t train = 200;
  std::size_t validation = 20;
  std::size_t test = 120;
};

struct SplitSpec {
  std::vector<std::string> train_pool;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::vector<std::string> unused;
  std::uint64_t shuffle_seed = 0;

  bool operator==(const SplitSpec&) const = default;
  nlohmann::json to_json() const;
  static SplitSpec from_json(const nlohmann::json& j);
};

/// The first `sizes.train` tasks (pool order) are training candidates; the
/// rest are shuffled once with `seed` and cut into validation, test, unused.
/// Throws kPoolTooSmall.
SplitSpec make_split(const std::vector<Task>& pool, SplitSizes sizes, std::uint64_t seed);

/// `n` distinct tasks drawn uniformly without replacement, in seed order.
/// Throws kNotEnoughFailures.
std::vector<Task> sample_training_set(const std::vector<Task>& failures, std::size_t n, std::uint64_t seed);

/// Looks up tasks by id, preserving the order of `ids`.
std::vector<Task> select_tasks(const std::vector<Task>& pool, const std::vector<std::string>& ids);

}  // namespace skilltune
