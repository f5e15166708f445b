// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <map>

#include "skilltune/error.hpp"
#include "skilltune/io.hpp"
#include "skilltune/mock_provider.hpp"
#include "skilltune/optimizer.hpp"
#include "toy_world.hpp"

using namespace skilltune;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;
}

RunConfig toy_config(const std::string& name, toy::WorldOptions options, std::size_t batch) {
  fs::path root = toy::scratch_dir(name);
  json j = toy::write_world(root, options);
  j["batch_size"] = batch;
  return RunConfig::from_json(j);
}

std::map<std::string, int> executions(const fs::path& run_dir, int iterations) {
  std::map<std::string, int> count;
  for (int t = 1; t <= iterations; ++t) {
    for (const auto& entry : fs::directory_iterator(run_dir / ("iter_" + std::to_string(t)) / "trajectories")) {
      ++count[entry.path().stem().string()];
    }
  }
  return count;
}

}  // namespace

TEST_CASE("batches walk the schedule round robin") {
  std::vector<std::string> schedule = {"a", "b", "c", "d", "e"};
  CHECK(batch_for_iteration(schedule, 2, 1) == std::vector<std::string>{"a", "b"});
  CHECK(batch_for_iteration(schedule, 2, 3) == std::vector<std::string>{"e", "a"});
  CHECK(batch_for_iteration(schedule, 5, 2) == schedule);
  CHECK_THROWS_AS(batch_for_iteration({}, 2, 1), Error);
  CHECK_THROWS_AS(batch_for_iteration(schedule, 2, 0), Error);
}

TEST_CASE("cost ledger") {
  CostLedger ledger;
  ledger.add(2, Stage::kPatch, Money::parse("0.5"));
  ledger.add(1, Stage::kExecution, Money::parse("0.2"));
  ledger.add(1, Stage::kExecution, Money::parse("0.1"));
  ledger.add(1, Stage::kDiagnosis, Money::parse("0.05"));
  CHECK(ledger.entries().size() == 3);
  CHECK(ledger.entries().front().stage == Stage::kExecution);
  CHECK(ledger.stage_total(1, Stage::kExecution) == Money::parse("0.3"));
  CHECK(ledger.iteration_total(1) == Money::parse("0.35"));
  CHECK(ledger.cumulative(0) == Money{});
  CHECK(ledger.cumulative(1) == Money::parse("0.35"));
  CHECK(ledger.cumulative(2) == Money::parse("0.85"));
  CHECK(CostLedger::from_json(ledger.to_json()) == ledger);
  CHECK(kind_of([&] { ledger.add(1, Stage::kPatch, Money::parse("-0.01")); }) == ErrorKind::kInvalidArgument);

  std::vector<UsageRecord> records = {{Role::kExecutor, Stage::kExecution, 3, "m", {1'000'000, 0}},
                                      {Role::kPatcher, Stage::kPatch, 3, "m", {0, 1'000'000}},
                                      {Role::kPatcher, Stage::kPatch, 4, "m", {5, 5}}};
  CostLedger charged;
  charged.charge(records, 3, PriceTable::from_json(toy::toy_prices()));
  CHECK(charged.stage_total(3, Stage::kExecution) == Money::parse("0.40"));
  CHECK(charged.stage_total(3, Stage::kPatch) == Money::parse("10"));
  CHECK(charged.iteration_total(4) == Money{});
  CostLedger free;
  free.charge(records, 3, PriceTable{});
  CHECK(free.cumulative(10) == Money{});
}

TEST_CASE("run config JSON") {
  RunConfig c;
  c.batch_size = 6;
  c.ablations.momentum_enabled = false;
  c.paths.skill_dir = "skill";
  c.paths.task_pool = "tasks";
  c.paths.run_dir = "run";
  c.providers = {{"default", "mock:x.json"}};
  json j = c.to_json();
  CHECK_FALSE(j["paths"].contains("run_dir"));
  RunConfig back = RunConfig::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.batch_size == 6);
  CHECK_FALSE(back.ablations.momentum_enabled);

  RunConfig partial = RunConfig::from_json(json{{"iterations", 3}}, c);
  CHECK(partial.iterations == 3);
  CHECK(partial.batch_size == 6);
  CHECK(kind_of([&] { RunConfig::from_json(json{{"iteration", 3}}); }) == ErrorKind::kInvalidArgument);
  CHECK(kind_of([&] { RunConfig::from_json(json{{"batch_size", "four"}}); }) == ErrorKind::kInvalidArgument);

  c.check();
  c.batch_size = 41;
  CHECK(kind_of([&] { c.check(); }) == ErrorKind::kInvalidArgument);
  c.batch_size = 4;
  c.paths.run_dir.clear();
  CHECK(kind_of([&] { c.check(); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("provider bindings") {
  fs::path root = toy::scratch_dir("opt_providers");
  toy::write_mock_script(root / "script.json", toy::WorldOptions{});
  RunConfig c;
  c.providers = {{"default", "mock:" + (root / "script.json").string()},
                 {"patcher", {{"kind", "mock"}, {"script", (root / "script.json").string()}, {"model", "p-model"}}}};
  ProviderSet set = make_providers(c);
  CHECK(set[Role::kExecutor].model_name() == "toy-mock");
  CHECK(set[Role::kPatcher].model_name() == "p-model");
  CHECK(&set[Role::kExecutor] == &set[Role::kMomentum]);

  c.providers = {{"executor", "mock:" + (root / "script.json").string()}};
  CHECK_THROWS_AS(make_providers(c), Error);
  c.providers = {{"default", "carrier-pigeon"}};
  CHECK_THROWS_AS(make_providers(c), Error);
  c.providers = json::object();
  CHECK_THROWS_AS(make_providers(c), Error);
}

TEST_CASE("a small run persists every stage") {
  toy::WorldOptions options;
  options.tasks = 12;
  options.iterations = 3;
  RunConfig config = toy_config("opt_small", options, 4);
  ProviderSet providers = make_providers(config);
  GridEnvironment env;
  RunState state = run(config, env, providers);
  const fs::path& dir = config.paths.run_dir;

  CHECK(state.current_iteration == 3);
  CHECK(state.snapshots.size() == 4);
  CHECK(state.memories.size() == 3);
  CHECK(state.schedule.size() == 12);
  auto counts = executions(dir, 3);
  CHECK(counts.size() == 12);
  for (const auto& [id, n] : counts) CHECK(n == 1);

  for (const char* f : {"config.json", "split.json", "state.json", "ledger.json", "baseline/failures.json",
                        "baseline/outcomes.json", "baseline/costs.json", "initial_skill/SKILL.md", "final/SKILL.md"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  for (const char* f : {"batch.json", "evidence.json", "diagnoses.json", "memory.json", "overlay.json", "patch.json",
                        "costs.json", "skill/SKILL.md"}) {
    CHECK_MESSAGE(fs::exists(dir / "iter_2" / f), f);
  }
  CHECK(read_json(dir / "baseline" / "failures.json").size() == 12);
  CHECK(fs::exists(dir / "baseline" / "trajectories" / "toy_000.jsonl"));

  json patch = read_json(dir / "iter_2" / "patch.json");
  CHECK(patch["applied"] == true);
  CHECK(patch["stage_seq"] == 5);
  CHECK(state.snapshots[2].find_resource("references/notes-2.md") != nullptr);
  CHECK(state.memories[0].patterns.at(0).id == "operation-slip");

  RunState loaded = load_run(dir);
  CHECK(loaded.current_iteration == 3);
  CHECK(loaded.snapshots == state.snapshots);
  CHECK(loaded.memories == state.memories);
  CHECK(loaded.ledger == state.ledger);
  CHECK(loaded.schedule == state.schedule);
  CHECK(read_json(dir / "iter_3" / "costs.json")["cumulative"] == state.ledger.cumulative(3).to_string());
  CHECK_FALSE(fs::exists(dir / ".lock"));

  CHECK(kind_of([&] { run(config, env, providers); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("batches larger than a pass of the schedule repeat tasks") {
  toy::WorldOptions options;
  options.tasks = 40;
  options.iterations = 10;
  RunConfig config = toy_config("opt_batch6", options, 6);
  ProviderSet providers = make_providers(config);
  GridEnvironment env;
  run(config, env, providers);
  auto counts = executions(config.paths.run_dir, 10);
  int total = 0;
  int twice = 0;
  for (const auto& [id, n] : counts) {
    total += n;
    if (n == 2) ++twice;
    CHECK((n == 1 || n == 2));
  }
  CHECK(total == 60);
  CHECK(counts.size() == 40);
  CHECK(twice == 20);
}

TEST_CASE("resume and corrupt run directories") {
  toy::WorldOptions options;
  options.tasks = 8;
  options.iterations = 2;
  RunConfig config = toy_config("opt_resume", options, 4);
  ProviderSet providers = make_providers(config);
  GridEnvironment env;
  run(config, env, providers);
  const fs::path& dir = config.paths.run_dir;

  std::string state_before = read_text(dir / "state.json");
  RunState same = resume(dir, 0, env, providers);
  CHECK(same.current_iteration == 2);
  CHECK(read_text(dir / "state.json") == state_before);
  CHECK(kind_of([&] { resume(dir, -1, env, providers); }) == ErrorKind::kInvalidArgument);

  RunState more = resume(dir, 1, env, providers);
  CHECK(more.current_iteration == 3);
  CHECK(load_run_config(dir).iterations == 3);

  fs::path empty = toy::scratch_dir("opt_empty_run");
  CHECK(kind_of([&] { load_run(empty); }) == ErrorKind::kCorruptRunDir);
  CHECK(kind_of([&] { resume(empty, 1, env, providers); }) == ErrorKind::kCorruptRunDir);
  fs::remove_all(dir / "iter_2" / "skill");
  CHECK(kind_of([&] { load_run(dir); }) == ErrorKind::kCorruptRunDir);
}

TEST_CASE("ablations change what is persisted") {
  toy::WorldOptions options;
  options.tasks = 6;
  options.iterations = 3;
  options.fix_iteration = {{"sum", 1}, {"max", 1}, {"count", 1}};
  RunConfig config = toy_config("opt_ablation", options, 3);
  config.ablations = {false, false};
  ProviderSet providers = make_providers(config);
  GridEnvironment env;
  RunState state = run(config, env, providers);
  const fs::path& dir = config.paths.run_dir;
  CHECK(state.memories.empty());
  CHECK_FALSE(fs::exists(dir / "iter_1" / "memory.json"));
  // Every task succeeds once S_1 carries all fixes; without contrastive
  // evidence iteration 2 has no signal and the skill is left unchanged.
  json evidence = read_json(dir / "iter_2" / "evidence.json");
  CHECK(evidence["items"].empty());
  CHECK(evidence["dropped_successes"].size() == 3);
  json patch = read_json(dir / "iter_2" / "patch.json");
  CHECK(patch["applied"] == false);
  CHECK(patch["magnitude"]["words_added"] == 0);
  CHECK(state.snapshots[2] == state.snapshots[1]);
  CHECK(load_run(dir).memories.empty());
}

TEST_CASE("evaluate_skill scores every task once") {
  toy::WorldOptions options;
  options.tasks = 120;
  options.tags.clear();
  options.fix_iteration.clear();
  for (int i = 0; i < 120; ++i) {
    std::string tag = "c" + std::to_string(i);
    options.tags.push_back(tag);
    if (i < 87) options.fix_iteration[tag] = 1;
  }
  options.iterations = 1;
  fs::path root = toy::scratch_dir("opt_eval");
  toy::write_world(root, options);
  std::vector<Task> tasks = load_task_pool(root / "tasks");
  SkillPackage skill = toy::initial_skill();
  skill.body = toy::fixed_body(options, 1);

  auto provider = std::make_shared<MockProvider>(MockProvider::from_file(root / "script.json"));
  auto log = std::make_shared<UsageLog>();
  provider->set_usage_log(log);
  GridEnvironment env;
  PromptLibrary prompts = PromptLibrary::defaults();
  EvalContext ctx{env, *provider, prompts, root / "eval_ws", 0, {}, 4};
  EvalResult result = evaluate_skill(skill, tasks, ctx);
  CHECK(result.successes == 87);
  CHECK(result.accuracy == doctest::Approx(0.725));
  CHECK(result.results.size() == 120);
  CHECK(result.trajectories.size() == 120);
  for (const UsageRecord& r : log->records()) CHECK(r.stage == Stage::kEvaluation);
  CHECK(result.to_json()["total"] == 120);
  CHECK(kind_of([&] { evaluate_skill(skill, {}, ctx); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("run directory lock") {
  fs::path dir = toy::scratch_dir("opt_lock");
  {
    RunLock lock(dir);
    CHECK(fs::exists(dir / ".lock"));
    CHECK(kind_of([&] { RunLock again(dir); }) == ErrorKind::kRunLocked);
  }
  CHECK_FALSE(fs::exists(dir / ".lock"));
  write_text(dir / ".lock", "999999999");
  {
    RunLock takeover(dir);
    CHECK(read_text(dir / ".lock") != "999999999");
  }
}
