// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "skilltune/analytics.hpp"
#include "skilltune/error.hpp"
#include "skilltune/io.hpp"
#include "skilltune/optimizer.hpp"
#include "skilltune/patcher.hpp"

namespace skilltune {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 8> kVerbs = {"init",   "baseline", "train", "resume",
                                                    "eval",   "report",   "diff",  "validate"};

// Flags that mirror RunConfig fields. Unset optionals leave the config file
// (or the defaults) in charge.
struct ConfigFlags {
  std::string config_file;
  std::optional<std::string> skill;
  std::optional<std::string> tasks;
  std::optional<std::string> run_dir;
  std::optional<std::string> prompts;
  std::optional<std::string> provider;
  std::optional<std::string> prices;
  std::optional<std::size_t> batch_size;
  std::optional<int> iterations;
  std::optional<int> max_turns;
  std::optional<std::size_t> train_size;
  std::optional<std::size_t> split_train;
  std::optional<std::size_t> split_validation;
  std::optional<std::size_t> split_test;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> split_seed;
  std::optional<std::uint64_t> training_seed;
  std::optional<std::size_t> parallelism;
  bool no_momentum = false;
  bool no_contrastive = false;
  bool eval_during_training = false;
};

void add_config_flags(CLI::App& cmd, ConfigFlags& f) {
  cmd.add_option("--config", f.config_file, "JSON run configuration");
  cmd.add_option("--skill", f.skill, "initial skill package directory");
  cmd.add_option("--tasks", f.tasks, "task pool directory");
  cmd.add_option("--run-dir", f.run_dir, "run directory");
  cmd.add_option("--prompts", f.prompts, "directory of prompt template overrides");
  cmd.add_option("--provider", f.provider, "mock:<script.json> or http");
  cmd.add_option("--prices", f.prices, "JSON price table (USD per 1M tokens)");
  cmd.add_option("--batch-size", f.batch_size);
  cmd.add_option("--iterations", f.iterations);
  cmd.add_option("--max-turns", f.max_turns);
  cmd.add_option("--train-size", f.train_size, "tasks sampled from initial failures");
  cmd.add_option("--split-train", f.split_train, "candidate pool size");
  cmd.add_option("--split-validation", f.split_validation);
  cmd.add_option("--split-test", f.split_test);
  cmd.add_option("--seed", f.seed, "sets both the split and the training seed");
  cmd.add_option("--split-seed", f.split_seed);
  cmd.add_option("--training-seed", f.training_seed);
  cmd.add_option("--parallelism", f.parallelism);
  cmd.add_flag("--no-momentum", f.no_momentum, "disable the pattern memory and overlay");
  cmd.add_flag("--no-contrastive", f.no_contrastive, "diagnose failures only");
  cmd.add_flag("--eval-during-training", f.eval_during_training, "score each snapshot on the validation split");
}

json provider_binding(const std::string& spec) { return {{"default", spec}}; }

RunConfig effective_config(const ConfigFlags& f) {
  RunConfig c;
  if (!f.config_file.empty()) c = RunConfig::from_json(read_json(f.config_file), c);
  if (f.skill) c.paths.skill_dir = *f.skill;
  if (f.tasks) c.paths.task_pool = *f.tasks;
  if (f.run_dir) c.paths.run_dir = *f.run_dir;
  if (f.prompts) c.paths.prompts_dir = *f.prompts;
  if (f.provider) c.providers = provider_binding(*f.provider);
  if (f.prices) c.prices = PriceTable::from_json(read_json(*f.prices));
  if (f.batch_size) c.batch_size = *f.batch_size;
  if (f.iterations) c.iterations = *f.iterations;
  if (f.max_turns) c.max_turns = *f.max_turns;
  if (f.train_size) c.train_size = *f.train_size;
  if (f.split_train) c.split.train = *f.split_train;
  if (f.split_validation) c.split.validation = *f.split_validation;
  if (f.split_test) c.split.test = *f.split_test;
  if (f.seed) c.seeds.split_seed = c.seeds.training_seed = *f.seed;
  if (f.split_seed) c.seeds.split_seed = *f.split_seed;
  if (f.training_seed) c.seeds.training_seed = *f.training_seed;
  if (f.parallelism) c.parallelism = *f.parallelism;
  if (f.no_momentum) c.ablations.momentum_enabled = false;
  if (f.no_contrastive) c.ablations.contrastive_enabled = false;
  if (f.eval_during_training) c.eval_during_training = true;
  return c;
}

void configure_logging(bool verbose, bool quiet) {
  auto logger = spdlog::get("skilltune");
  if (!logger) {
    logger = spdlog::stderr_color_mt("skilltune");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  }
  spdlog::set_level(quiet ? spdlog::level::warn : verbose ? spdlog::level::debug : spdlog::level::info);
}

int cmd_init(const std::string& dir, const std::string& name, const std::string& description, std::ostream& out) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    throw Error(ErrorKind::kInvalidArgument, dir + " exists and is not empty");
  }
  SkillPackage pkg;
  pkg.header.set("name", name);
  pkg.header.set("description", description);
  pkg.body = "# " + name + "\n\n## When to use\n\n" + description +
             "\n\n## Procedure\n\n1. Read the task and its input files.\n2. Write the result to the output file.\n";
  save_package(pkg, dir);
  out << "initialized " << dir << "\n";
  return 0;
}

int cmd_validate(const std::string& dir, std::ostream& out) {
  SkillPackage pkg = load_package(dir);
  std::vector<Violation> violations = validate(pkg);
  if (violations.empty()) {
    LayerMetrics m = layer_metrics(pkg);
    out << "ok: " << pkg.header.name() << " (L2 " << m.l2_lines << " lines, " << m.l2_words << " words; L3 "
        << m.l3_files << " files, " << m.l3_words << " words)\n";
    return 0;
  }
  for (const Violation& v : violations) out << to_string(v.kind) << ": " << v.element << "\n";
  throw Error(ErrorKind::kInvalidArgument, std::to_string(violations.size()) + " violation(s) in " + dir);
}

int cmd_diff(const std::string& a, const std::string& b, std::ostream& out) {
  PatchMagnitude m = patch_magnitude(load_package(a), load_package(b));
  out << "added=" << m.words_added << " removed=" << m.words_removed << "\n";
  out << "lines: added=" << m.lines_added << " removed=" << m.lines_removed << "\n";
  out << "chars: added=" << m.chars_added << " removed=" << m.chars_removed << "\n";
  return 0;
}

int cmd_baseline(const ConfigFlags& flags, std::ostream& out) {
  RunConfig config = effective_config(flags);
  config.check();
  ProviderSet providers = make_providers(config);
  GridEnvironment env;
  BaselineResult result = run_baseline(config, env, providers);
  write_json(config.paths.run_dir / "config.json", config.to_json());
  out << "baseline: " << result.failures.size() << " of " << result.split.train_pool.size()
      << " candidates failed under the initial skill\n";
  return 0;
}

int cmd_train(const ConfigFlags& flags, std::ostream& out) {
  RunConfig config = effective_config(flags);
  config.check();
  ProviderSet providers = make_providers(config);
  GridEnvironment env;
  RunState state = run(config, env, providers);
  out << "trained " << state.current_iteration << " iterations; final skill at "
      << (config.paths.run_dir / "final").string() << "\n";
  out << "total cost: " << state.ledger.cumulative(state.current_iteration).to_string() << " USD\n";
  return 0;
}

int cmd_resume(const std::string& run_dir, int extra, const std::optional<std::string>& provider,
               std::ostream& out) {
  RunConfig config = load_run_config(run_dir);
  if (provider) config.providers = provider_binding(*provider);
  ProviderSet providers = make_providers(config);
  GridEnvironment env;
  RunState state = resume(run_dir, extra, env, providers);
  out << "run now at iteration " << state.current_iteration << "\n";
  return 0;
}

struct EvalFlags {
  std::string skill;
  std::string tasks;
  std::string provider;
  std::string split_file;
  std::string part = "test";
  std::string out_dir;
  int max_turns = 30;
  std::size_t parallelism = 1;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  SkillPackage skill = load_package(f.skill);
  std::vector<Task> pool = load_task_pool(f.tasks);
  std::vector<Task> tasks = pool;
  if (!f.split_file.empty()) {
    SplitSpec split = SplitSpec::from_json(read_json(f.split_file));
    const std::vector<std::string>* ids = f.part == "test"         ? &split.test
                                          : f.part == "validation" ? &split.validation
                                          : f.part == "train"      ? &split.train_pool
                                                                   : nullptr;
    if (!ids) throw Error(ErrorKind::kInvalidArgument, "--part must be test, validation or train");
    tasks = select_tasks(pool, *ids);
  }
  RunConfig config;
  config.providers = provider_binding(f.provider);
  ProviderSet providers = make_providers(config);
  GridEnvironment env;
  PromptLibrary prompts = PromptLibrary::defaults();
  fs::path workspace = f.out_dir.empty()
                           ? fs::temp_directory_path() / ("skilltune-eval-" + std::to_string(::getpid()))
                           : fs::path(f.out_dir) / "workspaces";
  ExecutionLimits limits;
  limits.max_turns = f.max_turns;
  EvalContext ctx{env, providers[Role::kExecutor], prompts, workspace, 0, limits, f.parallelism};
  EvalResult result = evaluate_skill(skill, tasks, ctx);
  L3ActivationStats l3 = l3_activation(result.trajectories, skill);
  if (f.out_dir.empty()) {
    fs::remove_all(workspace);
  } else {
    write_json(fs::path(f.out_dir) / "eval.json", result.to_json());
    for (const Trajectory& t : result.trajectories) {
      save_trajectory(t, fs::path(f.out_dir) / "trajectories" / (t.task_id + ".jsonl"));
    }
    write_text(fs::path(f.out_dir) / "l3_activation.csv",
               l3_activation_table({{skill.header.name(), l3}}).to_csv());
  }
  std::size_t flagged = std::count_if(result.results.begin(), result.results.end(),
                                      [](const TaskResult& r) { return r.provider_failure; });
  out << "accuracy: " << result.successes << "/" << result.results.size() << " ("
      << 100.0 * result.accuracy << "%)\n";
  out << "L3 activation: " << l3.activated_tasks << "/" << l3.total_tasks << ", " << l3.l3_reads << " reads\n";
  if (flagged) out << "provider failures: " << flagged << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out_dir, std::ostream& out) {
  std::vector<std::vector<ReportTable>> per_run;
  for (const std::string& run_dir : runs) {
    per_run.push_back(write_reports(run_dir));
    out << "wrote " << (fs::path(run_dir) / "reports").string() << "\n";
  }
  if (runs.size() < 2) return 0;
  if (out_dir.empty()) throw Error(ErrorKind::kInvalidArgument, "--out is required when aggregating runs");
  json combined = json::object();
  for (std::size_t i = 0; i < per_run.front().size(); ++i) {
    std::vector<ReportTable> same;
    for (const auto& tables : per_run) same.push_back(tables[i]);
    if (same.front().columns().front().label != "iteration") continue;
    ReportTable agg = aggregate_seeds(same);
    write_text(fs::path(out_dir) / (agg.name() + ".csv"), agg.to_csv());
    combined[agg.name()] = agg.to_json();
  }
  write_json(fs::path(out_dir) / "report.json", {{"runs", runs}, {"tables", combined}});
  out << "wrote aggregate over " << runs.size() << " runs to " << out_dir << "\n";
  return 0;
}

}  // namespace

std::string usage_text() {
  return "usage: skilltune <verb> [options]\n"
         "verbs:\n"
         "  init <dir>            create a minimal skill package\n"
         "  baseline              run the initial skill over the candidate pool\n"
         "  train                 run the optimization loop\n"
         "  resume <run_dir>      continue a run for --extra iterations\n"
         "  eval                  score a skill on a task set\n"
         "  report <run_dir>...   emit report tables (aggregated over several runs)\n"
         "  diff <a> <b>          patch magnitude between two skill packages\n"
         "  validate <dir>        check a skill package\n"
         "run `skilltune <verb> --help` for the options of a verb\n";
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  // Global flags may precede the verb.
  auto first = std::find_if(args.begin(), args.end(), [](const std::string& a) {
    return a != "-q" && a != "--quiet" && a != "-v" && a != "--verbose";
  });
  if (first == args.end() || (*first != "-h" && *first != "--help" &&
                              std::find(kVerbs.begin(), kVerbs.end(), *first) == kVerbs.end())) {
    if (first != args.end()) err << "error: unknown verb '" << *first << "'\n";
    err << usage_text();
    return 2;
  }

  CLI::App app{"Optimize agent skill packages from execution feedback", "skilltune"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose);
  app.add_flag("-q,--quiet", quiet);

  std::string init_dir, init_name, init_description = "Describe when this skill applies.";
  auto* init = app.add_subcommand("init", "create a minimal skill package");
  init->add_option("dir", init_dir)->required();
  init->add_option("--name", init_name)->required();
  init->add_option("--description", init_description);

  ConfigFlags baseline_flags;
  add_config_flags(*app.add_subcommand("baseline", "run the initial skill over the candidate pool"), baseline_flags);
  ConfigFlags train_flags;
  add_config_flags(*app.add_subcommand("train", "run the optimization loop"), train_flags);

  std::string resume_dir;
  int resume_extra = 0;
  std::optional<std::string> resume_provider;
  auto* resume_cmd = app.add_subcommand("resume", "continue a run");
  resume_cmd->add_option("run_dir", resume_dir)->required();
  resume_cmd->add_option("--extra", resume_extra, "additional iterations")->required();
  resume_cmd->add_option("--provider", resume_provider, "override the recorded provider binding");

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "score a skill on a task set");
  eval->add_option("--skill", eval_flags.skill)->required();
  eval->add_option("--tasks", eval_flags.tasks)->required();
  eval->add_option("--provider", eval_flags.provider)->required();
  eval->add_option("--split", eval_flags.split_file, "split.json selecting a subset");
  eval->add_option("--part", eval_flags.part, "test, validation or train");
  eval->add_option("--out", eval_flags.out_dir, "write eval.json and trajectories here");
  eval->add_option("--max-turns", eval_flags.max_turns);
  eval->add_option("--parallelism", eval_flags.parallelism);

  std::vector<std::string> report_runs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "emit report tables");
  report->add_option("run_dirs", report_runs)->required();
  report->add_option("--out", report_out, "aggregate output directory");

  std::string diff_a, diff_b;
  auto* diff = app.add_subcommand("diff", "patch magnitude between two skill packages");
  diff->add_option("a", diff_a)->required();
  diff->add_option("b", diff_b)->required();

  std::string validate_dir;
  auto* validate_cmd = app.add_subcommand("validate", "check a skill package");
  validate_cmd->add_option("dir", validate_dir)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 2;
  }

  configure_logging(verbose, quiet);
  try {
    if (*init) return cmd_init(init_dir, init_name, init_description, out);
    if (app.got_subcommand("baseline")) return cmd_baseline(baseline_flags, out);
    if (app.got_subcommand("train")) return cmd_train(train_flags, out);
    if (*resume_cmd) return cmd_resume(resume_dir, resume_extra, resume_provider, out);
    if (*eval) return cmd_eval(eval_flags, out);
    if (*report) return cmd_report(report_runs, report_out, out);
    if (*diff) return cmd_diff(diff_a, diff_b, out);
    if (*validate_cmd) return cmd_validate(validate_dir, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << "\n";
    return 1;
  }
  err << usage_text();
  return 2;
}

}  // namespace skilltune
