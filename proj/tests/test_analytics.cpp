// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "skilltune/analytics.hpp"
#include "skilltune/error.hpp"
#include "skilltune/io.hpp"
#include "toy_world.hpp"

using namespace skilltune;
namespace fs = std::filesystem;

namespace {

Trajectory reads(const std::string& id, int n) {
  Trajectory t;
  t.task_id = id;
  Turn turn;
  for (int i = 0; i < n; ++i) turn.tool_calls.push_back({"c", std::string(kReadReferenceTool), "{}", ""});
  turn.tool_calls.push_back({"f", "finish", "{}", "ok"});
  t.turns.push_back(turn);
  return t;
}

std::int64_t int_at(const ReportTable& t, std::size_t row, std::size_t col) {
  return std::get<std::int64_t>(t.rows().at(row).at(col));
}

}  // namespace

TEST_CASE("CSV headers and cells") {
  ReportTable t("demo", {{"skill", ""}, {"count", "tasks"}, {"rate", "percent"}, {"cost", "USD"}});
  t.add_row({std::string("plain"), std::int64_t{3}, 12.5, Money::parse("0.25")});
  t.add_row({std::string("with, comma \"quoted\"\nnewline"), std::int64_t{-1}, 2.0, Money{}});
  std::string csv = t.to_csv();
  CHECK(csv.rfind("skill,count (tasks),rate (percent),cost (USD)\n", 0) == 0);
  CHECK(csv.find("\"plain\",3,12.5,0.25\n") != std::string::npos);
  CHECK(csv.find(",2.0,0.00") != std::string::npos);
  ReportTable back = ReportTable::from_csv("demo", csv);
  CHECK(back == t);
  CHECK(back.to_json()["rows"][0][3] == "0.25");
}

TEST_CASE("table validation") {
  ReportTable t("x", {{"a", ""}, {"b", "USD"}});
  CHECK_THROWS_AS(t.add_row({std::int64_t{1}}), Error);
  CHECK_THROWS_AS(t.add_row({std::int64_t{1}, 0.5}), Error);
  CHECK_THROWS_AS(t.add_row({Money{}, Money{}}), Error);
  CHECK_THROWS_AS(ReportTable("bad", {{"a (b)", ""}}), Error);
  CHECK_THROWS_AS(ReportTable::from_csv("x", "a,b (USD)\n1\n"), Error);
  CHECK_THROWS_AS(ReportTable::from_csv("x", "a,b (USD)\nabc,1\n"), Error);
  CHECK_THROWS_AS(ReportTable::from_csv("x", "a\n\"open\n"), Error);
}

TEST_CASE("L3 activation counts") {
  SkillPackage skill = toy::initial_skill();
  skill.resources = {{"references/a.md", "a"}, {"references/b.md", "b"}, {"references/c.md", "c"}};
  std::vector<Trajectory> ts = {reads("t1", 0), reads("t2", 2), reads("t3", 1), reads("t4", 0)};
  L3ActivationStats s = l3_activation(ts, skill);
  CHECK(s == L3ActivationStats{3, 3, 2, 4});

  SkillPackage bare = toy::initial_skill();
  L3ActivationStats none = l3_activation({reads("t1", 0), reads("t2", 0)}, bare);
  CHECK(none == L3ActivationStats{0, 0, 0, 2});

  ReportTable table = l3_activation_table({{"three refs", s}, {"bare", none}, {"empty", {}}});
  CHECK(table.name() == "l3_activation");
  CHECK(std::get<double>(table.rows()[0][5]) == doctest::Approx(50.0));
  CHECK(std::get<double>(table.rows()[1][5]) == 0.0);
  CHECK(std::get<double>(table.rows()[2][5]) == 0.0);
  CHECK(l3_activation_table({{"x", {1, 1, 1, 3}}}).rows()[0][5] == Cell{33.3});
}

TEST_CASE("cost series accumulates the ledger") {
  RunState run;
  run.current_iteration = 3;
  run.ledger.add(1, Stage::kExecution, Money::parse("0.2"));
  run.ledger.add(2, Stage::kPatch, Money::parse("0.3"));
  run.ledger.add(3, Stage::kDiagnosis, Money::parse("0.1"));
  run.ledger.add(3, Stage::kMomentum, Money::parse("0.4"));
  ReportTable t = cost_series(run);
  const std::size_t total = t.columns().size() - 2;
  const std::size_t cumulative = t.columns().size() - 1;
  CHECK(t.columns()[cumulative].unit == "USD");
  CHECK(t.rows()[0][cumulative] == Cell{Money::parse("0.2")});
  CHECK(t.rows()[1][cumulative] == Cell{Money::parse("0.5")});
  CHECK(t.rows()[2][total] == Cell{Money::parse("0.5")});
  CHECK(t.rows()[2][cumulative] == Cell{Money::parse("1.0")});
  CHECK(ReportTable::from_csv("costs", t.to_csv()) == t);
}

TEST_CASE("identity runs have zero magnitude and flat structure") {
  RunState run;
  run.current_iteration = 3;
  run.snapshots.assign(4, toy::initial_skill());
  ReportTable m = magnitude_series(run);
  REQUIRE(m.rows().size() == 3);
  for (const auto& row : m.rows()) {
    for (std::size_t c = 1; c < row.size(); ++c) CHECK(row[c] == Cell{std::int64_t{0}});
  }
  ReportTable s = structure_series(run);
  REQUIRE(s.rows().size() == 4);
  CHECK(int_at(s, 0, 0) == 0);
  for (std::size_t c = 1; c < s.columns().size(); ++c) CHECK(s.rows()[0][c] == s.rows()[3][c]);

  run.snapshots.pop_back();
  CHECK_THROWS_AS(magnitude_series(run), Error);
}

TEST_CASE("dynamics series") {
  RunState run;
  run.current_iteration = 2;
  run.config.ablations.momentum_enabled = false;
  ReportTable zeros = dynamics_series(run);
  REQUIRE(zeros.rows().size() == 2);
  CHECK(int_at(zeros, 1, 1) == 0);

  run.config.ablations.momentum_enabled = true;
  try {
    dynamics_series(run);
    FAIL("expected MissingArtifacts");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingArtifacts);
  }
  Pattern p;
  p.id = "p";
  p.summary = "p";
  p.appeared_in = {1};
  run.memories = {PatternMemory{1, {p}}, PatternMemory{2, {p}}};
  ReportTable d = dynamics_series(run);
  CHECK(int_at(d, 0, 1) == 1);
  CHECK(int_at(d, 0, 2) == 1);
  CHECK(int_at(d, 1, 2) == 0);
  CHECK(int_at(d, 1, 3) == 0);
}

TEST_CASE("seed aggregation") {
  auto table = [](std::int64_t v, const char* usd) {
    ReportTable t("m", {{"iteration", ""}, {"words", "words"}, {"label", ""}, {"cost", "USD"}});
    t.add_row({std::int64_t{1}, v, std::string("x"), Money::parse(usd)});
    return t;
  };
  ReportTable agg = aggregate_seeds({table(1, "1"), table(3, "3")});
  CHECK(agg.name() == "m_aggregate");
  REQUIRE(agg.columns().size() == 5);
  CHECK(agg.columns()[1].label == "words_mean");
  CHECK(agg.rows()[0][1] == Cell{2.0});
  CHECK(agg.rows()[0][2] == Cell{1.0});
  CHECK(agg.rows()[0][3] == Cell{Money::parse("2")});
  CHECK(agg.rows()[0][4] == Cell{Money::parse("1")});

  ReportTable other("m", {{"iteration", ""}});
  CHECK_THROWS_AS(aggregate_seeds({table(1, "1"), other}), Error);
  CHECK_THROWS_AS(aggregate_seeds({}), Error);
}

TEST_CASE("reports of a toy run") {
  fs::path root = toy::scratch_dir("analytics_run");
  toy::WorldOptions options;
  options.tasks = 6;
  options.iterations = 2;
  nlohmann::json j = toy::write_world(root, options);
  j["batch_size"] = 3;
  RunConfig config = RunConfig::from_json(j);
  ProviderSet providers = make_providers(config);
  GridEnvironment env;
  run(config, env, providers);

  std::vector<ReportTable> tables = write_reports(config.paths.run_dir);
  CHECK(tables.size() == 5);
  for (const char* f : {"structure.csv", "dynamics.csv", "magnitude.csv", "costs.csv", "training_l3_activation.csv",
                        "report.json"}) {
    CHECK_MESSAGE(fs::exists(config.paths.run_dir / "reports" / f), f);
  }
  ReportTable magnitude = ReportTable::from_csv("magnitude", read_text(config.paths.run_dir / "reports" / "magnitude.csv"));
  CHECK(magnitude == tables[2]);
  CHECK(int_at(magnitude, 0, 1) > 0);

  try {
    write_reports(toy::scratch_dir("analytics_empty"));
    FAIL("expected MissingArtifacts");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingArtifacts);
  }
}
