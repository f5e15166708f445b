// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/optimizer.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "skilltune/error.hpp"
#include "skilltune/http_provider.hpp"
#include "skilltune/io.hpp"
#include "skilltune/mock_provider.hpp"
#include "skilltune/parallel.hpp"

namespace skilltune {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Position of each artifact in the per-iteration stage order.
constexpr int kSeqExecution = 1;
constexpr int kSeqEvidence = 2;
constexpr int kSeqDiagnosis = 3;
constexpr int kSeqMomentum = 4;
constexpr int kSeqPatch = 5;
constexpr int kSeqCosts = 6;
constexpr int kSeqEvaluation = 7;

fs::path iter_dir(const fs::path& run_dir, int t) { return run_dir / ("iter_" + std::to_string(t)); }

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_known_keys(const json& j, std::initializer_list<std::string_view> keys, std::string_view where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw Error(ErrorKind::kInvalidArgument, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

json read_json_or_corrupt(const fs::path& file) {
  if (!fs::exists(file)) throw Error(ErrorKind::kCorruptRunDir, "missing " + file.string());
  try {
    return read_json(file);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kCorruptRunDir, file.string() + ": " + e.what());
  }
}

std::shared_ptr<ChatProvider> provider_from_spec(const json& spec) {
  if (spec.is_string()) {
    const std::string s = spec.get<std::string>();
    if (s.rfind("mock:", 0) == 0) return std::make_shared<MockProvider>(MockProvider::from_file(s.substr(5)));
    if (s == "http") return std::make_shared<HttpProvider>(HttpProviderConfig::from_json_and_env(json::object()));
    throw Error(ErrorKind::kInvalidArgument, "provider must be \"mock:<script>\" or \"http\", got \"" + s + "\"");
  }
  if (spec.is_object() && spec.contains("kind")) {
    const std::string kind = spec.at("kind");
    if (kind == "mock") {
      MockProvider mock = MockProvider::from_file(spec.at("script").get<std::string>());
      return std::make_shared<MockProvider>(mock.rules(), spec.value("model", mock.model_name()));
    }
    if (kind == "http") return std::make_shared<HttpProvider>(HttpProviderConfig::from_json_and_env(spec));
  }
  throw Error(ErrorKind::kInvalidArgument, "unrecognized provider binding " + spec.dump());
}

void save_outcomes(const std::vector<Trajectory>& trajectories, const fs::path& file, int iteration, int seq) {
  json rows = json::array();
  for (const Trajectory& t : trajectories) {
    rows.push_back({{"task_id", t.task_id},
                    {"success", t.final_outcome.success},
                    {"truncated", t.truncated},
                    {"provider_error", t.error},
                    {"turns", t.turns.size()}});
  }
  json doc = {{"iteration", iteration}, {"executions", rows}};
  if (seq > 0) doc["stage_seq"] = seq;
  write_json(file, doc);
}

std::vector<Trajectory> execute_all(const SkillPackage& skill, const std::vector<Task>& tasks, const Environment& env,
                                    ChatProvider& provider, const PromptLibrary& prompts, Stage stage, int iteration,
                                    int skill_iteration, const fs::path& workspace_root, const ExecutionLimits& limits,
                                    std::size_t parallelism) {
  std::vector<Trajectory> out(tasks.size());
  parallel_for(tasks.size(), parallelism, [&](std::size_t i) {
    ExecutionContext ctx{env,       provider,  prompts, stage, iteration, skill_iteration,
                         workspace_root / tasks[i].id, limits};
    out[i] = execute(skill, tasks[i], ctx);
  });
  return out;
}

PromptLibrary prompts_for(const RunConfig& config) {
  return config.paths.prompts_dir.empty() ? PromptLibrary::defaults()
                                          : PromptLibrary::with_overrides(config.paths.prompts_dir);
}

ExecutionLimits limits_for(const RunConfig& config) { return {config.max_turns, config.decoding}; }

struct Session {
  const RunConfig& config;
  const Environment& env;
  ProviderSet& providers;
  PromptLibrary prompts;
  std::shared_ptr<UsageLog> log;
  std::vector<Task> pool;
};

Session open_session(const RunConfig& config, const Environment& env, ProviderSet& providers) {
  Session s{config, env, providers, prompts_for(config), std::make_shared<UsageLog>(), {}};
  providers.set_usage_log(s.log);
  s.pool = load_task_pool(config.paths.task_pool);
  return s;
}

BaselineResult baseline_unlocked(Session& s) {
  const RunConfig& config = s.config;
  const fs::path& run_dir = config.paths.run_dir;
  SkillPackage initial = load_package(config.paths.skill_dir);
  if (auto v = validate(initial); !v.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "initial skill is invalid: " + std::string(to_string(v.front().kind)) +
                                                 " at " + v.front().element);
  }
  save_package(initial, run_dir / "initial_skill");

  BaselineResult result;
  result.split = make_split(s.pool, config.split, config.seeds.split_seed);
  write_json(run_dir / "split.json", result.split.to_json());

  std::vector<Task> candidates = select_tasks(s.pool, result.split.train_pool);
  spdlog::info("baseline: executing the initial skill on {} candidate tasks", candidates.size());
  std::vector<Trajectory> trajectories =
      execute_all(initial, candidates, s.env, s.providers[Role::kExecutor], s.prompts, Stage::kExecution, 0, 0,
                  run_dir / "baseline" / "workspaces", limits_for(config), config.parallelism);
  for (const Trajectory& t : trajectories) {
    if (t.final_outcome.success) continue;
    result.failures.push_back(t.task_id);
    result.store.put(t);
  }
  result.store.save(run_dir / "baseline" / "trajectories");
  save_outcomes(trajectories, run_dir / "baseline" / "outcomes.json", 0, 0);
  write_json(run_dir / "baseline" / "failures.json", result.failures);

  CostLedger costs;
  costs.charge(s.log->records(), 0, config.prices);
  write_json(run_dir / "baseline" / "costs.json", costs.to_json());
  spdlog::info("baseline: {} of {} candidates failed", result.failures.size(), candidates.size());
  return result;
}

struct LoopState {
  SkillPackage skill;
  PatternMemory memory;
};

json patch_record(const PatchProposal& proposal, bool applied, const std::string& reason, const PatchMagnitude& m) {
  json doc = proposal.patch.to_json();
  doc["stage_seq"] = kSeqPatch;
  doc["applied"] = applied;
  doc["skip_reason"] = reason;
  doc["attempts"] = proposal.attempts;
  doc["magnitude"] = {{"words_added", m.words_added}, {"words_removed", m.words_removed},
                      {"lines_added", m.lines_added}, {"lines_removed", m.lines_removed},
                      {"chars_added", m.chars_added}, {"chars_removed", m.chars_removed}};
  return doc;
}

void run_iteration(Session& s, RunState& state, LoopState& loop, const BaselineStore& baseline, int t) {
  const RunConfig& config = s.config;
  const fs::path dir = iter_dir(config.paths.run_dir, t);
  fs::remove_all(dir);

  // Execute S_{t-1} on the batch.
  std::vector<std::string> batch_ids = batch_for_iteration(state.schedule, config.batch_size, t);
  std::vector<Task> batch = select_tasks(s.pool, batch_ids);
  std::vector<Trajectory> trajectories =
      execute_all(loop.skill, batch, s.env, s.providers[Role::kExecutor], s.prompts, Stage::kExecution, t, t - 1,
                  dir / "workspaces", limits_for(config), config.parallelism);
  for (const Trajectory& tr : trajectories) save_trajectory(tr, dir / "trajectories" / (tr.task_id + ".jsonl"));
  save_outcomes(trajectories, dir / "batch.json", t, kSeqExecution);

  // Loss evidence.
  std::vector<LossEvidence> evidence;
  std::vector<Task> evidence_tasks;
  json dropped = json::array();
  json evidence_skipped = json::array();
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& tr = trajectories[i];
    if (tr.final_outcome.success && !config.ablations.contrastive_enabled) {
      dropped.push_back(tr.task_id);
      continue;
    }
    try {
      evidence.push_back(build_evidence(tr.task_id, tr, baseline));
      evidence_tasks.push_back(batch[i]);
    } catch (const Error& e) {
      spdlog::warn("iteration {}: no evidence for {}: {}", t, tr.task_id, e.what());
      evidence_skipped.push_back({{"task_id", tr.task_id}, {"reason", e.what()}});
    }
  }
  json evidence_doc = {{"iteration", t}, {"stage_seq", kSeqEvidence}, {"items", json::array()},
                       {"skipped", evidence_skipped}};
  for (const LossEvidence& e : evidence) evidence_doc["items"].push_back(evidence_summary(e));
  if (!config.ablations.contrastive_enabled) evidence_doc["dropped_successes"] = dropped;
  write_json(dir / "evidence.json", evidence_doc);

  // Per-task diagnoses.
  DiagnosisSet diagnoses;
  diagnoses.iteration = t;
  if (!evidence.empty()) {
    DiagnosisContext dctx{s.env, s.providers, s.prompts, t, config.keep_turns, config.parallelism, config.decoding};
    try {
      diagnoses = diagnose_batch(loop.skill, evidence_tasks, evidence, dctx);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kBatchDiagnosisFailure) throw;
      spdlog::warn("iteration {}: {}", t, e.what());
      for (const LossEvidence& ev : evidence) diagnoses.skipped.push_back({ev.task_id, e.what()});
    }
  }
  json diag_doc = diagnoses.to_json();
  diag_doc["stage_seq"] = kSeqDiagnosis;
  write_json(dir / "diagnoses.json", diag_doc);
  const bool has_signal = !diagnoses.items.empty();

  // Momentum.
  Overlay overlay;
  overlay.iteration = t;
  if (config.ablations.momentum_enabled) {
    MomentumUpdate update;
    update.memory = loop.memory;
    update.memory.iteration = t;
    update.overlay = overlay;
    if (!has_signal) {
      update.fallback = true;
      update.fallback_reason = "no diagnoses this iteration";
    } else {
      MomentumContext mctx{s.providers, s.prompts, t, config.decoding};
      try {
        update = update_momentum(loop.memory, diagnoses, loop.skill, mctx);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kProviderFailure) throw;
        spdlog::warn("iteration {}: {}; memory carried over", t, e.what());
        update.fallback = true;
        update.fallback_reason = e.what();
      }
    }
    loop.memory = update.memory;
    overlay = update.overlay;
    json mem_doc = loop.memory.to_json();
    mem_doc["stage_seq"] = kSeqMomentum;
    mem_doc["update"] = {{"fallback", update.fallback}, {"reason", update.fallback_reason},
                         {"attempts", update.attempts}};
    write_json(dir / "memory.json", mem_doc);
    json ov_doc = overlay.to_json();
    ov_doc["stage_seq"] = kSeqMomentum;
    write_json(dir / "overlay.json", ov_doc);
    state.memories.push_back(loop.memory);
  }

  // Layer-aware patch.
  PatchProposal proposal;
  proposal.patch.iteration = t;
  std::string skip_reason;
  SkillPackage next = loop.skill;
  if (!has_signal) {
    skip_reason = "no diagnoses this iteration";
  } else {
    PatchContext pctx{s.providers, s.prompts, t, config.decoding};
    const bool momentum = config.ablations.momentum_enabled;
    try {
      proposal = propose_patch(loop.skill, diagnoses, momentum ? &loop.memory : nullptr, momentum ? &overlay : nullptr,
                               pctx);
      if (proposal.skipped) {
        skip_reason = proposal.skip_reason;
      } else {
        next = apply_patch(loop.skill, proposal.patch);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kProviderFailure && e.kind() != ErrorKind::kDeleteOfMissingResource &&
          e.kind() != ErrorKind::kResultInvalid) {
        throw;
      }
      spdlog::warn("iteration {}: {}; skill left unchanged", t, e.what());
      skip_reason = e.what();
      next = loop.skill;
    }
  }
  const bool applied = skip_reason.empty();
  write_json(dir / "patch.json", patch_record(proposal, applied, skip_reason, patch_magnitude(loop.skill, next)));
  loop.skill = std::move(next);
  save_package(loop.skill, dir / "skill");

  // Optional held-out scoring of S_t.
  if (config.eval_during_training && !state.schedule.empty()) {
    SplitSpec split = SplitSpec::from_json(read_json(config.paths.run_dir / "split.json"));
    if (!split.validation.empty()) {
      EvalContext ectx{s.env, s.providers[Role::kExecutor], s.prompts, dir / "eval_workspaces", t,
                       limits_for(config), config.parallelism};
      json eval_doc = evaluate_skill(loop.skill, select_tasks(s.pool, split.validation), ectx).to_json();
      eval_doc["iteration"] = t;
      eval_doc["stage_seq"] = kSeqEvaluation;
      write_json(dir / "eval.json", eval_doc);
    }
  }

  // Costs of every stage of this iteration.
  state.ledger.charge(s.log->records(), t, config.prices);
  json stages = json::object();
  for (Stage stage : kAllStages) stages[std::string(to_string(stage))] = state.ledger.stage_total(t, stage).to_string();
  write_json(dir / "costs.json", {{"iteration", t},
                                  {"stage_seq", kSeqCosts},
                                  {"stages", stages},
                                  {"total", state.ledger.iteration_total(t).to_string()},
                                  {"cumulative", state.ledger.cumulative(t).to_string()}});

  save_package(loop.skill, config.paths.run_dir / "final");
  write_json(config.paths.run_dir / "ledger.json", state.ledger.to_json());
  state.snapshots.push_back(loop.skill);
  state.current_iteration = t;
  write_json(config.paths.run_dir / "state.json",
             {{"completed_iteration", t}, {"schedule", state.schedule}});
  spdlog::info("iteration {}: {}/{} solved, {} diagnoses, patch {}", t,
               std::count_if(trajectories.begin(), trajectories.end(),
                             [](const Trajectory& tr) { return tr.final_outcome.success; }),
               trajectories.size(), diagnoses.items.size(), applied ? "applied" : "skipped");
}

void run_until(Session& s, RunState& state, int last_iteration) {
  BaselineStore baseline = BaselineStore::load(s.config.paths.run_dir / "baseline" / "trajectories");
  LoopState loop{state.snapshots.back(), {}};
  if (!state.memories.empty()) loop.memory = state.memories.back();
  for (int t = state.current_iteration + 1; t <= last_iteration; ++t) run_iteration(s, state, loop, baseline, t);
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::check() const {
  if (batch_size < 1) throw Error(ErrorKind::kInvalidArgument, "batch_size must be at least 1");
  if (iterations < 1) throw Error(ErrorKind::kInvalidArgument, "iterations must be at least 1");
  if (max_turns < 1) throw Error(ErrorKind::kInvalidArgument, "max_turns must be at least 1");
  if (train_size < 1) throw Error(ErrorKind::kInvalidArgument, "train_size must be at least 1");
  if (batch_size > train_size) {
    throw Error(ErrorKind::kInvalidArgument, "batch_size cannot exceed train_size");
  }
  if (parallelism < 1) throw Error(ErrorKind::kInvalidArgument, "parallelism must be at least 1");
  if (paths.skill_dir.empty()) throw Error(ErrorKind::kInvalidArgument, "no skill directory configured");
  if (paths.task_pool.empty()) throw Error(ErrorKind::kInvalidArgument, "no task pool configured");
  if (paths.run_dir.empty()) throw Error(ErrorKind::kInvalidArgument, "no run directory configured");
}

json RunConfig::to_json() const {
  return {
      {"batch_size", batch_size},
      {"iterations", iterations},
      {"max_turns", max_turns},
      {"train_size", train_size},
      {"split", {{"train", split.train}, {"validation", split.validation}, {"test", split.test}}},
      {"seeds", {{"split_seed", seeds.split_seed}, {"training_seed", seeds.training_seed}}},
      {"ablations",
       {{"momentum_enabled", ablations.momentum_enabled}, {"contrastive_enabled", ablations.contrastive_enabled}}},
      {"paths",
       {{"skill_dir", paths.skill_dir.generic_string()},
        {"task_pool", paths.task_pool.generic_string()},
        {"prompts_dir", paths.prompts_dir.generic_string()}}},
      {"providers", providers},
      {"prices", prices.to_json()},
      {"parallelism", parallelism},
      {"keep_turns", keep_turns},
      {"eval_during_training", eval_during_training},
      {"decoding", {{"temperature", decoding.temperature}, {"max_output_tokens", decoding.max_output_tokens}}},
  };
}

RunConfig RunConfig::from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw Error(ErrorKind::kInvalidArgument, "config must be a JSON object");
  check_known_keys(j,
                   {"batch_size", "iterations", "max_turns", "train_size", "split", "seeds", "ablations", "paths",
                    "providers", "prices", "parallelism", "keep_turns", "eval_during_training", "decoding"},
                   "config");
  try {
    read_field(j, "batch_size", c.batch_size);
    read_field(j, "iterations", c.iterations);
    read_field(j, "max_turns", c.max_turns);
    read_field(j, "train_size", c.train_size);
    read_field(j, "parallelism", c.parallelism);
    read_field(j, "keep_turns", c.keep_turns);
    read_field(j, "eval_during_training", c.eval_during_training);
    if (j.contains("split")) {
      const json& s = j.at("split");
      read_field(s, "train", c.split.train);
      read_field(s, "validation", c.split.validation);
      read_field(s, "test", c.split.test);
    }
    if (j.contains("seeds")) {
      read_field(j.at("seeds"), "split_seed", c.seeds.split_seed);
      read_field(j.at("seeds"), "training_seed", c.seeds.training_seed);
    }
    if (j.contains("ablations")) {
      read_field(j.at("ablations"), "momentum_enabled", c.ablations.momentum_enabled);
      read_field(j.at("ablations"), "contrastive_enabled", c.ablations.contrastive_enabled);
    }
    if (j.contains("paths")) {
      const json& p = j.at("paths");
      if (p.contains("skill_dir")) c.paths.skill_dir = p.at("skill_dir").get<std::string>();
      if (p.contains("task_pool")) c.paths.task_pool = p.at("task_pool").get<std::string>();
      if (p.contains("run_dir")) c.paths.run_dir = p.at("run_dir").get<std::string>();
      if (p.contains("prompts_dir")) c.paths.prompts_dir = p.at("prompts_dir").get<std::string>();
    }
    if (j.contains("providers")) c.providers = j.at("providers");
    if (j.contains("prices")) c.prices = PriceTable::from_json(j.at("prices"));
    if (j.contains("decoding")) {
      read_field(j.at("decoding"), "temperature", c.decoding.temperature);
      read_field(j.at("decoding"), "max_output_tokens", c.decoding.max_output_tokens);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, std::string("bad config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::from_json(const json& j) { return from_json(j, RunConfig{}); }

ProviderSet make_providers(const RunConfig& config) {
  if (!config.providers.is_object() || config.providers.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "no provider configured");
  }
  std::map<std::string, std::shared_ptr<ChatProvider>> by_spec;
  auto instance = [&](const json& spec) {
    auto& slot = by_spec[spec.dump()];
    if (!slot) slot = provider_from_spec(spec);
    return slot;
  };
  ProviderSet set;
  if (config.providers.contains("default")) set = ProviderSet(instance(config.providers.at("default")));
  for (const auto& [key, spec] : config.providers.items()) {
    if (key != "default") set.bind(role_from_string(key), instance(spec));
  }
  for (Role role : kAllRoles) (void)set[role];  // every role must resolve
  return set;
}

// ---------------------------------------------------------------------------
// CostLedger

void CostLedger::add(int iteration, Stage stage, Money usd) {
  if (usd < Money{}) throw Error(ErrorKind::kInvalidArgument, "negative cost");
  auto key = [](const CostEntry& e) { return std::pair(e.iteration, static_cast<int>(e.stage)); };
  CostEntry probe{iteration, stage, usd};
  auto it = std::lower_bound(entries_.begin(), entries_.end(), probe,
                             [&](const CostEntry& a, const CostEntry& b) { return key(a) < key(b); });
  if (it != entries_.end() && key(*it) == key(probe)) {
    it->usd += usd;
  } else {
    entries_.insert(it, probe);
  }
}

Money CostLedger::stage_total(int iteration, Stage stage) const {
  Money sum;
  for (const CostEntry& e : entries_) {
    if (e.iteration == iteration && e.stage == stage) sum += e.usd;
  }
  return sum;
}

Money CostLedger::iteration_total(int iteration) const {
  Money sum;
  for (const CostEntry& e : entries_) {
    if (e.iteration == iteration) sum += e.usd;
  }
  return sum;
}

Money CostLedger::cumulative(int t) const {
  Money sum;
  for (const CostEntry& e : entries_) {
    if (e.iteration <= t) sum += e.usd;
  }
  return sum;
}

void CostLedger::charge(const std::vector<UsageRecord>& records, int iteration, const PriceTable& prices) {
  std::map<Stage, Money> by_stage;
  for (const UsageRecord& r : records) {
    if (r.iteration != iteration) continue;
    Money cost = prices.empty() ? Money{} : cost_of(r.usage, prices, {to_string(r.role), r.model});
    by_stage[r.stage] += cost;
  }
  for (const auto& [stage, usd] : by_stage) add(iteration, stage, usd);
}

json CostLedger::to_json() const {
  json rows = json::array();
  for (const CostEntry& e : entries_) {
    rows.push_back({{"iteration", e.iteration}, {"stage", to_string(e.stage)}, {"usd", e.usd.to_string()}});
  }
  return rows;
}

CostLedger CostLedger::from_json(const json& j) {
  CostLedger ledger;
  for (const json& row : j) {
    ledger.add(row.at("iteration").get<int>(), stage_from_string(row.at("stage").get<std::string>()),
               Money::parse(row.at("usd").get<std::string>()));
  }
  return ledger;
}

// ---------------------------------------------------------------------------
// Runs

std::vector<std::string> batch_for_iteration(const std::vector<std::string>& schedule, std::size_t batch_size,
                                             int iteration) {
  if (schedule.empty() || iteration < 1) throw Error(ErrorKind::kInvalidArgument, "empty schedule or iteration < 1");
  std::vector<std::string> batch;
  const std::size_t start = static_cast<std::size_t>(iteration - 1) * batch_size;
  for (std::size_t k = 0; k < batch_size; ++k) batch.push_back(schedule[(start + k) % schedule.size()]);
  return batch;
}

BaselineResult run_baseline(const RunConfig& config, const Environment& env, ProviderSet& providers) {
  config.check();
  fs::create_directories(config.paths.run_dir);
  RunLock lock(config.paths.run_dir);
  Session s = open_session(config, env, providers);
  return baseline_unlocked(s);
}

RunState run(const RunConfig& config, const Environment& env, ProviderSet& providers) {
  config.check();
  const fs::path& run_dir = config.paths.run_dir;
  fs::create_directories(run_dir);
  RunLock lock(run_dir);
  if (fs::exists(run_dir / "state.json")) {
    throw Error(ErrorKind::kInvalidArgument, run_dir.string() + " already holds a run; use resume to continue it");
  }
  write_json(run_dir / "config.json", config.to_json());
  Session s = open_session(config, env, providers);

  std::vector<std::string> failures;
  if (fs::exists(run_dir / "baseline" / "failures.json")) {
    failures = read_json(run_dir / "baseline" / "failures.json").get<std::vector<std::string>>();
  } else {
    failures = baseline_unlocked(s).failures;
  }

  RunState state;
  state.config = config;
  for (const Task& task : sample_training_set(select_tasks(s.pool, failures), config.train_size,
                                              config.seeds.training_seed)) {
    state.schedule.push_back(task.id);
  }
  state.snapshots.push_back(load_package(run_dir / "initial_skill"));
  write_json(run_dir / "state.json", {{"completed_iteration", 0}, {"schedule", state.schedule}});
  write_json(run_dir / "ledger.json", state.ledger.to_json());
  run_until(s, state, config.iterations);
  return state;
}

RunConfig load_run_config(const fs::path& run_dir) {
  RunConfig config = RunConfig::from_json(read_json_or_corrupt(run_dir / "config.json"));
  config.paths.run_dir = run_dir;
  return config;
}

RunState load_run(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw Error(ErrorKind::kCorruptRunDir, run_dir.string() + " is not a directory");
  RunState state;
  state.config = load_run_config(run_dir);
  json st = read_json_or_corrupt(run_dir / "state.json");
  try {
    state.current_iteration = st.at("completed_iteration").get<int>();
    state.schedule = st.at("schedule").get<std::vector<std::string>>();
    state.ledger = CostLedger::from_json(read_json_or_corrupt(run_dir / "ledger.json"));
    state.snapshots.push_back(load_package(run_dir / "initial_skill"));
    for (int t = 1; t <= state.current_iteration; ++t) {
      state.snapshots.push_back(load_package(iter_dir(run_dir, t) / "skill"));
      if (state.config.ablations.momentum_enabled) {
        state.memories.push_back(PatternMemory::from_json(read_json_or_corrupt(iter_dir(run_dir, t) / "memory.json")));
      }
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kCorruptRunDir) throw;
    throw Error(ErrorKind::kCorruptRunDir, e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kCorruptRunDir, e.what());
  }
  return state;
}

RunState resume(const fs::path& run_dir, int extra, const Environment& env, ProviderSet& providers) {
  if (extra < 0) throw Error(ErrorKind::kInvalidArgument, "extra iterations must be non-negative");
  RunState state = load_run(run_dir);
  if (extra == 0) return state;
  RunLock lock(run_dir);
  state.config.iterations = state.current_iteration + extra;
  write_json(run_dir / "config.json", state.config.to_json());
  Session s = open_session(state.config, env, providers);
  run_until(s, state, state.config.iterations);
  return state;
}

// ---------------------------------------------------------------------------
// Evaluation

json EvalResult::to_json() const {
  json rows = json::array();
  for (const TaskResult& r : results) {
    rows.push_back({{"task_id", r.task_id},
                    {"success", r.success},
                    {"provider_failure", r.provider_failure},
                    {"feedback", r.feedback}});
  }
  return {{"accuracy", accuracy}, {"successes", successes}, {"total", results.size()}, {"tasks", rows}};
}

EvalResult evaluate_skill(const SkillPackage& skill, const std::vector<Task>& tasks, const EvalContext& ctx) {
  if (tasks.empty()) throw Error(ErrorKind::kInvalidArgument, "evaluation needs at least one task");
  std::vector<Trajectory> trajectories =
      execute_all(skill, tasks, ctx.environment, ctx.provider, ctx.prompts, Stage::kEvaluation, ctx.iteration,
                  ctx.iteration, ctx.workspace_root, ctx.limits, ctx.parallelism);
  EvalResult out;
  for (const Trajectory& t : trajectories) {
    TaskResult r{t.task_id, t.final_outcome.success, !t.error.empty(), t.final_outcome.feedback};
    if (r.success) ++out.successes;
    out.results.push_back(std::move(r));
  }
  out.trajectories = std::move(trajectories);
  out.accuracy = static_cast<double>(out.successes) / static_cast<double>(tasks.size());
  return out;
}

// ---------------------------------------------------------------------------
// RunLock

RunLock::RunLock(const fs::path& run_dir) : file_(run_dir / ".lock") {
  for (int attempt = 0; attempt < 2; ++attempt) {
    int fd = ::open(file_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      std::string pid = std::to_string(::getpid());
      ssize_t written = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      if (written != static_cast<ssize_t>(pid.size())) {
        throw Error(ErrorKind::kIoFailure, "cannot write " + file_.string());
      }
      return;
    }
    if (errno != EEXIST) throw Error(ErrorKind::kIoFailure, file_.string() + ": " + std::strerror(errno));
    // Take over a lock whose owner no longer exists.
    std::string owner;
    try {
      owner = read_text(file_);
    } catch (const Error&) {
    }
    if (owner.empty() || fs::exists(fs::path("/proc") / owner)) break;
    spdlog::warn("removing stale lock left by process {}", owner);
    fs::remove(file_);
  }
  throw Error(ErrorKind::kRunLocked, run_dir.string() + " is in use by another process");
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(file_, ec);
}

}  // namespace skilltune
