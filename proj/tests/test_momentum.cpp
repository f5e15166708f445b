// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "oracles.hpp"
#include "skilltune/error.hpp"
#include "skilltune/mock_provider.hpp"
#include "skilltune/momentum.hpp"
#include "toy_world.hpp"

using namespace skilltune;
using nlohmann::json;

namespace {

Pattern pattern(std::string id, std::vector<int> appeared, PatternStatus status = PatternStatus::kRecurring) {
  Pattern p;
  p.id = std::move(id);
  p.summary = "summary of " + p.id;
  p.appeared_in = std::move(appeared);
  p.status = status;
  return p;
}

std::string fenced(const json& j) { return "Here is the update.\n```json\n" + j.dump() + "\n```\n"; }

json new_ref(std::string ref, std::string summary, int t) {
  return {{"ref", std::move(ref)}, {"summary", std::move(summary)}, {"character", "workflow"}, {"status", "new"},
          {"appeared_in", {t}}};
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;
}

DiagnosisSet diagnoses_at(int t) {
  DiagnosisSet set;
  set.iteration = t;
  set.items.push_back({"toy_001", DiagnosisKind::kFailure, "Mechanism: off by one\nDetails.", "off by one", {}});
  return set;
}

}  // namespace

TEST_CASE("dynamics of the three-iteration example") {
  PatternMemory m1{1, {pattern("a", {1}, PatternStatus::kNew), pattern("b", {1}, PatternStatus::kNew)}};
  PatternMemory m2{2, {pattern("a", {1}), pattern("b", {1}), pattern("c", {2}, PatternStatus::kNew),
                       pattern("d", {2}, PatternStatus::kNew)}};
  PatternMemory m3{3, {pattern("a", {1, 3}), pattern("b", {1}), pattern("c", {2}), pattern("d", {2})}};
  auto rows = derived_metrics({m1, m2, m3});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == DynamicsRow{1, 2, 2, 2});
  CHECK(rows[1] == DynamicsRow{2, 4, 2, 2});
  CHECK(rows[2] == DynamicsRow{3, 4, 0, 1});

  auto expected = oracle::dynamics({{{"a", {1}}, {"b", {1}}},
                                    {{"a", {1}}, {"b", {1}}, {"c", {2}}, {"d", {2}}},
                                    {{"a", {1, 3}}, {"b", {1}}, {"c", {2}}, {"d", {2}}}});
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].cumulative == expected[k].cumulative);
    CHECK(rows[k].fresh == expected[k].fresh);
    CHECK(rows[k].active == expected[k].active);
  }
  CHECK(derived_metrics({}).empty());
}

TEST_CASE("memory invariants") {
  PatternMemory m{3, {pattern("a", {1, 3})}};
  CHECK(m.check().empty());
  m.patterns.push_back(pattern("a", {2}));
  CHECK_FALSE(m.check().empty());
  CHECK_FALSE(PatternMemory{3, {pattern("x", {3, 2})}}.check().empty());
  CHECK_FALSE(PatternMemory{3, {pattern("x", {4})}}.check().empty());
  CHECK_FALSE(PatternMemory{3, {pattern("x", {1, 2}, PatternStatus::kNew)}}.check().empty());
  CHECK_FALSE(PatternMemory{3, {pattern("x", {1}, PatternStatus::kRetired)}}.check().empty());
  Pattern retired = pattern("x", {1}, PatternStatus::kRetired);
  retired.retired_reason = "covered";
  CHECK(PatternMemory{3, {retired}}.check().empty());
}

TEST_CASE("memory and overlay JSON round trip") {
  Pattern p = pattern("check-units", {1, 2});
  p.character = PatternCharacter::kWorkflow;
  p.evidence_refs = {{1, "t1"}, {2, "t9"}};
  p.skill_anchor = "Procedure";
  PatternMemory m{2, {p}};
  CHECK(PatternMemory::from_json(m.to_json()) == m);
  Overlay o{2, {{"check-units", "Say which units"}}};
  CHECK(Overlay::from_json(o.to_json()) == o);
  CHECK_THROWS_AS(PatternMemory::from_json(json{{"iteration", 1}}), Error);
}

TEST_CASE("slugs are stable and unique") {
  CHECK(pattern_slug("Skips the Header Row!", {}) == "skips-the-header-row");
  CHECK(pattern_slug("  ", {}) == "pattern");
  CHECK(pattern_slug("dup", {"dup"}) == "dup-2");
  CHECK(pattern_slug("dup", {"dup", "dup-2"}) == "dup-3");
  CHECK(pattern_slug(std::string(60, 'a'), {}).size() == 40);
}

TEST_CASE("json block extraction") {
  CHECK(extract_json_block("x\n```json\n{\"a\":1}\n```\n") == "{\"a\":1}");
  CHECK(extract_json_block("prefix {\"a\":{}} suffix") == "{\"a\":{}}");
  CHECK_FALSE(extract_json_block("no json here").has_value());
}

TEST_CASE("a reply creates, updates and carries patterns") {
  PatternMemory prev{1, {pattern("old-one", {1}, PatternStatus::kNew), pattern("untouched", {1}, PatternStatus::kNew)}};
  prev.patterns[0].evidence_refs = {{1, "t1"}};
  json reply = {{"patterns",
                 {{{"ref", "old-one"}, {"summary", "old one"}, {"character", "operation"}, {"status", "recurring"},
                   {"appeared_in", {1, 2}}, {"evidence", {{{"iteration", 2}, {"task_id", "t5"}}}}},
                  new_ref("new:x", "Fresh Mechanism", 2)}},
                {"overlay", {{{"ref", "new:x"}, {"directive", "Add a check"}}, {{"ref", "untouched"}, {"directive", "Keep"}}}}};
  auto [memory, overlay] = apply_momentum_reply(prev, 2, fenced(reply));
  CHECK(memory.iteration == 2);
  REQUIRE(memory.patterns.size() == 3);
  CHECK(memory.patterns[0].appeared_in == std::vector<int>{1, 2});
  CHECK(memory.patterns[0].evidence_refs == std::vector<EvidenceRef>{{1, "t1"}, {2, "t5"}});
  CHECK(memory.patterns[1] == prev.patterns[1]);
  CHECK(memory.patterns[2].id == "fresh-mechanism");
  CHECK(overlay.iteration == 2);
  REQUIRE(overlay.focus.size() == 2);
  CHECK(overlay.focus[0].pattern_id == "fresh-mechanism");
  CHECK(overlay.focus[1].pattern_id == "untouched");
}

TEST_CASE("schema violations") {
  PatternMemory prev{1, {pattern("p", {1}, PatternStatus::kNew)}};
  auto violation = [&](const json& reply) {
    return kind_of([&] { apply_momentum_reply(prev, 2, fenced(reply)); });
  };
  auto existing = [](json appeared) {
    return json{{"ref", "p"}, {"summary", "p"}, {"character", "operation"}, {"status", "recurring"},
                {"appeared_in", std::move(appeared)}};
  };
  CHECK(kind_of([&] { apply_momentum_reply(prev, 2, "nothing"); }) == ErrorKind::kSchemaViolation);
  CHECK(kind_of([&] { apply_momentum_reply(prev, 2, "```json\n{oops\n```"); }) == ErrorKind::kSchemaViolation);
  CHECK(violation(json{{"items", json::array()}}) == ErrorKind::kSchemaViolation);
  CHECK(violation(json{{"patterns", {existing({2})}}}) == ErrorKind::kSchemaViolation);     // drops 1
  CHECK(violation(json{{"patterns", {existing({1, 3})}}}) == ErrorKind::kSchemaViolation);  // gains 3 at t=2
  CHECK(violation(json{{"patterns", {new_ref("new:q", "q", 1)}}}) == ErrorKind::kSchemaViolation);
  CHECK(violation(json{{"patterns", {new_ref("new:q", "q", 2), new_ref("new:q", "r", 2)}}}) ==
        ErrorKind::kSchemaViolation);
  json bad_character = new_ref("new:q", "q", 2);
  bad_character["character"] = "mood";
  CHECK(violation(json{{"patterns", {bad_character}}}) == ErrorKind::kSchemaViolation);
  CHECK(violation(json{{"patterns", json::array()}, {"overlay", {{{"ref", "ghost"}, {"directive", "d"}}}}}) ==
        ErrorKind::kSchemaViolation);
  CHECK(violation(json{{"patterns", json::array()}, {"overlay", {{{"ref", "p"}, {"directive", ""}}}}}) ==
        ErrorKind::kSchemaViolation);
  // Unchanged history is allowed: the pattern simply did not recur.
  CHECK(apply_momentum_reply(prev, 2, fenced(json{{"patterns", {existing({1})}}})).first.patterns.size() == 1);
}

TEST_CASE("update_momentum repairs once, then falls back") {
  PromptLibrary prompts = PromptLibrary::defaults();
  SkillPackage skill = toy::initial_skill();
  PatternMemory prev{1, {pattern("p", {1}, PatternStatus::kNew)}};

  MockRule bad;
  bad.role = Role::kMomentum;
  bad.turn = 1;
  bad.response.content = "not json";
  MockRule good;
  good.role = Role::kMomentum;
  good.turn = 2;
  good.last_contains = {"could not be used"};
  good.response.content = fenced(json{{"patterns", {new_ref("new:z", "z", 2)}}});

  {
    ProviderSet providers(std::make_shared<MockProvider>(std::vector<MockRule>{bad, good}));
    MomentumContext ctx{providers, prompts, 2};
    MomentumUpdate u = update_momentum(prev, diagnoses_at(2), skill, ctx);
    CHECK_FALSE(u.fallback);
    CHECK(u.attempts == 2);
    CHECK(u.memory.patterns.size() == 2);
  }
  {
    MockRule always_bad = bad;
    always_bad.turn.reset();
    ProviderSet providers(std::make_shared<MockProvider>(std::vector<MockRule>{always_bad}));
    MomentumContext ctx{providers, prompts, 2};
    MomentumUpdate u = update_momentum(prev, diagnoses_at(2), skill, ctx);
    CHECK(u.fallback);
    CHECK(u.attempts == 2);
    CHECK(u.memory.iteration == 2);
    CHECK(u.memory.patterns == prev.patterns);
    CHECK(u.overlay.focus.empty());
    CHECK(u.fallback_reason.find("no JSON block") != std::string::npos);
  }
  {
    ProviderSet providers(std::make_shared<MockProvider>(std::vector<MockRule>{}));
    MomentumContext ctx{providers, prompts, 2};
    CHECK(kind_of([&] { update_momentum(prev, diagnoses_at(2), skill, ctx); }) == ErrorKind::kProviderFailure);
    CHECK(kind_of([&] { update_momentum(prev, diagnoses_at(3), skill, ctx); }) == ErrorKind::kInvalidArgument);
  }
}

TEST_CASE("momentum request carries memory and diagnoses") {
  PromptLibrary prompts = PromptLibrary::defaults();
  ProviderSet providers;
  MomentumContext ctx{providers, prompts, 2};
  ChatRequest req = momentum_request(PatternMemory{1, {pattern("p", {1}, PatternStatus::kNew)}}, diagnoses_at(2),
                                     toy::initial_skill(), ctx);
  CHECK(req.role == Role::kMomentum);
  CHECK(req.stage == Stage::kMomentum);
  const std::string& prompt = req.messages.at(0).content;
  CHECK(prompt.find("\"id\": \"p\"") != std::string::npos);
  CHECK(prompt.find("off by one") != std::string::npos);
  CHECK(prompt.find("This is iteration 2") != std::string::npos);
}
