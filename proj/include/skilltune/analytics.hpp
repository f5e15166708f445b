// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "skilltune/execution.hpp"
#include "skilltune/money.hpp"
#include "skilltune/optimizer.hpp"

namespace skilltune {

/// Cells in a "USD" column are Money; everything else is int, real or text.
using Cell = std::variant<std::int64_t, double, Money, std::string>;

inline constexpr std::string_view kUsdUnit = "USD";

struct Column {
  std::string label;  // no parentheses
  std::string unit;   // may be empty

  bool operator==(const Column&) const = default;
};

class ReportTable {
 public:
  ReportTable(std::string name, std::vector<Column> columns);

  const std::string& name() const { return name_; }
  const std::vector<Column>& columns() const { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }

  /// Throws kInvalidArgument on an arity or cell-type mismatch.
  void add_row(std::vector<Cell> row);

  /// Header cells are "label (unit)"; text cells are always quoted.
  std::string to_csv() const;
  /// Inverse of to_csv. Throws kInvalidArgument.
  static ReportTable from_csv(std::string name, std::string_view csv);
  nlohmann::json to_json() const;

  bool operator==(const ReportTable&) const = default;

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::vector<std::vector<Cell>> rows_;
};

struct L3ActivationStats {
  std::size_t l3_files = 0;
  std::size_t l3_reads = 0;
  std::size_t activated_tasks = 0;
  std::size_t total_tasks = 0;

  bool operator==(const L3ActivationStats&) const = default;
};

/// A task is activated when its trajectory holds at least one read_reference call.
L3ActivationStats l3_activation(const std::vector<Trajectory>& trajectories, const SkillPackage& skill);

/// One row per labelled skill: files, reads, activated/total and percentage.
ReportTable l3_activation_table(const std::vector<std::pair<std::string, L3ActivationStats>>& rows,
                                std::string name = "l3_activation");

/// Full layer metrics per snapshot; row 0 is the initial skill.
ReportTable structure_series(const RunState& run);
/// Pattern counts per iteration; all zeros for a run without momentum.
/// Throws kMissingArtifacts.
ReportTable dynamics_series(const RunState& run);
/// Word, line and char diff totals between consecutive snapshots.
ReportTable magnitude_series(const RunState& run);
/// Per-stage cost, iteration total and running total.
ReportTable cost_series(const RunState& run);
/// L3 activation of each training batch under the skill it executed.
/// Throws kMissingArtifacts.
ReportTable training_l3_series(const RunState& run);

/// Row-wise mean and population standard deviation across seeds. Tables must
/// share shape and their first column (the iteration). Throws kInvalidArgument.
ReportTable aggregate_seeds(const std::vector<ReportTable>& tables);

/// Loads a run for reporting. Throws kMissingArtifacts.
RunState load_for_report(const std::filesystem::path& run_dir);

/// Writes `<run_dir>/reports/<table>.csv` and `report.json`.
std::vector<ReportTable> write_reports(const std::filesystem::path& run_dir);

}  // namespace skilltune
