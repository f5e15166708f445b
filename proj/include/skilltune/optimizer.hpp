// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skilltune/diagnosis.hpp"
#include "skilltune/execution.hpp"
#include "skilltune/momentum.hpp"
#include "skilltune/money.hpp"
#include "skilltune/patcher.hpp"
#include "skilltune/provider.hpp"

namespace skilltune {

struct RunSeeds {
  std::uint64_t split_seed = 0;
  std::uint64_t training_seed = 0;
};

struct Ablations {
  bool momentum_enabled = true;
  bool contrastive_enabled = true;
};

struct RunPaths {
  std::filesystem::path skill_dir;
  std::filesystem::path task_pool;
  std::filesystem::path run_dir;      // never written to config.json
  std::filesystem::path prompts_dir;  // optional template overrides
};

struct RunConfig {
  std::size_t batch_size = 4;
  int iterations = 10;
  int max_turns = 30;
  std::size_t train_size = 40;  // tasks sampled from initial-skill failures
  SplitSizes split;
  RunSeeds seeds;
  Ablations ablations;
  RunPaths paths;
  /// Role name or "default" -> "mock:<script>" or {"kind": "http", ...}.
  nlohmann::json providers = nlohmann::json::object();
  PriceTable prices;
  std::size_t parallelism = 1;
  std::size_t keep_turns = 6;
  bool eval_during_training = false;  // scores each snapshot on the validation split
  Decoding decoding;

  /// Throws kInvalidArgument.
  void check() const;
  nlohmann::json to_json() const;
  /// Keys absent from `j` keep the values already in `base`.
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
  static RunConfig from_json(const nlohmann::json& j);
};

/// Builds the role bindings of `config.providers`. Throws kInvalidArgument.
ProviderSet make_providers(const RunConfig& config);

struct CostEntry {
  int iteration = 0;
  Stage stage = Stage::kExecution;
  Money usd;

  bool operator==(const CostEntry&) const = default;
};

class CostLedger {
 public:
  /// Adds `usd` to the (iteration, stage) entry. Throws kInvalidArgument on
  /// a negative amount.
  void add(int iteration, Stage stage, Money usd);
  const std::vector<CostEntry>& entries() const { return entries_; }

  Money stage_total(int iteration, Stage stage) const;
  Money iteration_total(int iteration) const;
  /// Sum of every entry with iteration <= t.
  Money cumulative(int t) const;

  /// Prices every record belonging to `iteration`.
  void charge(const std::vector<UsageRecord>& records, int iteration, const PriceTable& prices);

  nlohmann::json to_json() const;
  static CostLedger from_json(const nlohmann::json& j);
  bool operator==(const CostLedger&) const = default;

 private:
  std::vector<CostEntry> entries_;  // sorted by (iteration, stage)
};

/// In-memory view of a run directory.
struct RunState {
  RunConfig config;
  int current_iteration = 0;                // last completed iteration
  std::vector<std::string> schedule;        // training pool in shuffled order
  std::vector<SkillPackage> snapshots;      // index t = S_t, S_0 = initial skill
  std::vector<PatternMemory> memories;      // index t-1 = M_t (momentum runs only)
  CostLedger ledger;
};

/// Task ids of batch `iteration` (1-based), wrapping around the schedule.
std::vector<std::string> batch_for_iteration(const std::vector<std::string>& schedule, std::size_t batch_size,
                                             int iteration);

struct BaselineResult {
  SplitSpec split;
  std::vector<std::string> failures;
  BaselineStore store;
};

/// Runs the initial skill over the split's training candidates and persists
/// split.json, initial_skill/ and baseline/ under the run directory.
BaselineResult run_baseline(const RunConfig& config, const Environment& env, ProviderSet& providers);

/// Runs the configured number of iterations, taking the baseline from disk
/// when present. Fatal only on persistence failure.
RunState run(const RunConfig& config, const Environment& env, ProviderSet& providers);

/// Continues a run for `extra` more iterations. Throws kCorruptRunDir.
RunState resume(const std::filesystem::path& run_dir, int extra, const Environment& env, ProviderSet& providers);

/// Reads config, snapshots, memories and ledger back from disk.
/// Throws kCorruptRunDir.
RunState load_run(const std::filesystem::path& run_dir);

/// Reads config.json and fills in `paths.run_dir`.
RunConfig load_run_config(const std::filesystem::path& run_dir);

struct TaskResult {
  std::string task_id;
  bool success = false;
  bool provider_failure = false;
  std::string feedback;
};

struct EvalResult {
  double accuracy = 0.0;
  std::size_t successes = 0;
  std::vector<TaskResult> results;
  std::vector<Trajectory> trajectories;

  nlohmann::json to_json() const;
};

struct EvalContext {
  const Environment& environment;
  ChatProvider& provider;
  const PromptLibrary& prompts;
  std::filesystem::path workspace_root;
  int iteration = 0;
  ExecutionLimits limits;
  std::size_t parallelism = 1;
};

/// Executes every task once. Throws kInvalidArgument on an empty list.
EvalResult evaluate_skill(const SkillPackage& skill, const std::vector<Task>& tasks, const EvalContext& ctx);

/// Exclusive per-run-directory lock. Throws kRunLocked.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path file_;
};

}  // namespace skilltune
