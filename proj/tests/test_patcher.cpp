// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "oracles.hpp"
#include "skilltune/error.hpp"
#include "skilltune/mock_provider.hpp"
#include "skilltune/patcher.hpp"
#include "toy_world.hpp"

using namespace skilltune;
using nlohmann::json;

namespace {

SkillPackage base_skill() {
  SkillPackage s = toy::initial_skill();
  s.resources.push_back({"references/a.md", "alpha notes\n"});
  return s;
}

std::string fenced(const json& j) { return "```json\n" + j.dump() + "\n```"; }

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kInvalidArgument;
}

std::map<std::string, std::string> tree(const SkillPackage& s) {
  std::map<std::string, std::string> files = {{"SKILL.md", s.render_skill_file()}};
  for (const Resource& r : s.resources) files[r.path] = r.text;
  return files;
}

DiagnosisSet one_diagnosis(int t) {
  DiagnosisSet set;
  set.iteration = t;
  set.items.push_back({"toy_002", DiagnosisKind::kContrastive, "DIAG-TEXT", "", {}});
  return set;
}

}  // namespace

TEST_CASE("patch JSON round trip") {
  PatchSet p{3,
             {ReplaceBody{"# b\n"}, UpsertResource{"references/x.md", "x"}, DeleteResource{"references/a.md"},
              ReplaceHeaderField{"description", "d"}}};
  json j = p.to_json();
  CHECK(j["edits"][0]["op"] == "replace_body");
  CHECK(j["edits"][3]["op"] == "set_header");
  CHECK(PatchSet::from_json(j) == p);
  CHECK_THROWS_AS(PatchSet::from_json(json{{"iteration", 1}, {"edits", {{{"op", "rename"}}}}}), Error);
}

TEST_CASE("check_patch enforces routing rules") {
  SkillPackage s = base_skill();
  CHECK(check_patch(PatchSet{1, {}}, s).empty());
  CHECK(check_patch(PatchSet{1, {ReplaceBody{"a"}, ReplaceBody{"b"}}}, s).size() == 1);
  CHECK_FALSE(check_patch(PatchSet{1, {ReplaceBody{" \n"}}}, s).empty());
  CHECK_FALSE(check_patch(PatchSet{1, {UpsertResource{"notes.md", "x"}}}, s).empty());
  CHECK_FALSE(check_patch(PatchSet{1, {UpsertResource{"references/../x.md", "x"}}}, s).empty());
  CHECK_FALSE(check_patch(PatchSet{1, {DeleteResource{"references/b.md"}}}, s).empty());
  CHECK(check_patch(PatchSet{1, {UpsertResource{"references/b.md", "x"}, DeleteResource{"references/b.md"}}}, s).empty());
  CHECK_FALSE(check_patch(PatchSet{1, {DeleteResource{"references/a.md"}, DeleteResource{"references/a.md"}}}, s).empty());
  CHECK_FALSE(check_patch(PatchSet{1, {ReplaceHeaderField{"name", "other"}}}, s).empty());
  CHECK_FALSE(check_patch(PatchSet{1, {ReplaceHeaderField{"description", " "}}}, s).empty());
  CHECK(check_patch(PatchSet{1, {ReplaceHeaderField{"license", "MIT"}}}, s).empty());
}

TEST_CASE("apply_patch returns a new package") {
  SkillPackage s = base_skill();
  const SkillPackage original = s;
  SkillPackage out = apply_patch(s, PatchSet{1,
                                             {ReplaceBody{"# New body\n"}, UpsertResource{"references/0.md", "zero"},
                                              UpsertResource{"references/a.md", "alpha v2\n"},
                                              ReplaceHeaderField{"license", "MIT"}}});
  CHECK(s == original);
  CHECK(out.body == "# New body\n");
  REQUIRE(out.resources.size() == 2);
  CHECK(out.resources[0].path == "references/0.md");
  CHECK(out.find_resource("references/a.md")->text == "alpha v2\n");
  CHECK(out.header.get("license") == "MIT");
  CHECK(out.header.get("name") == "grid-aggregation");

  CHECK(apply_patch(s, PatchSet{1, {}}) == s);
  SkillPackage removed = apply_patch(s, PatchSet{1, {DeleteResource{"references/a.md"}}});
  CHECK(removed.resources.empty());
  CHECK(removed.body == s.body);

  CHECK(kind_of([&] { apply_patch(s, PatchSet{1, {DeleteResource{"references/zz.md"}}}); }) ==
        ErrorKind::kDeleteOfMissingResource);
  CHECK(kind_of([&] { apply_patch(s, PatchSet{1, {ReplaceHeaderField{"name", "renamed"}}}); }) ==
        ErrorKind::kResultInvalid);
  CHECK(kind_of([&] { apply_patch(s, PatchSet{1, {ReplaceBody{""}}}); }) == ErrorKind::kResultInvalid);
}

TEST_CASE("patch magnitude matches the oracle") {
  SkillPackage before = base_skill();
  SkillPackage after = apply_patch(before, PatchSet{1,
                                                    {ReplaceBody{before.body + "5. Double check the answer.\n"},
                                                     DeleteResource{"references/a.md"},
                                                     UpsertResource{"references/b.md", "beta one two\n"}}});
  PatchMagnitude m = patch_magnitude(before, after);
  auto w = oracle::tree_word_diff(tree(before), tree(after));
  CHECK(m.words_added == w.added);
  CHECK(m.words_removed == w.removed);
  CHECK(m.words_added == 5 + 3);
  CHECK(m.words_removed == 2);
  CHECK(m.lines_added == 1 + 1);
  CHECK(m.lines_removed == 1);
  CHECK(m.chars_added == std::string("5. Double check the answer.\nbeta one two\n").size());
  CHECK(m.chars_removed == std::string("alpha notes\n").size());
  CHECK(patch_magnitude(before, before) == PatchMagnitude{});
}

TEST_CASE("patch replies are parsed and checked") {
  SkillPackage s = base_skill();
  PatchSet p = parse_patch_reply(fenced({{"edits", {{{"op", "upsert_resource"}, {"path", "references/n.md"},
                                                      {"content", "n"}}}}}),
                                 s, 4);
  CHECK(p.iteration == 4);
  CHECK(p.edits.size() == 1);
  CHECK(kind_of([&] { parse_patch_reply("no block", s, 4); }) == ErrorKind::kUnparseablePatch);
  CHECK(kind_of([&] { parse_patch_reply(fenced({{"patch", json::array()}}), s, 4); }) == ErrorKind::kUnparseablePatch);
  CHECK(kind_of([&] {
          parse_patch_reply(fenced({{"edits", {{{"op", "delete_resource"}, {"path", "references/q.md"}}}}}), s, 4);
        }) == ErrorKind::kUnparseablePatch);
  CHECK(kind_of([&] { parse_patch_reply(fenced({{"edits", {{{"op", "replace_body"}}}}}), s, 4); }) ==
        ErrorKind::kUnparseablePatch);
}

TEST_CASE("patcher prompt includes momentum only when given") {
  PromptLibrary prompts = PromptLibrary::defaults();
  ProviderSet providers;
  PatchContext ctx{providers, prompts, 2};
  PatternMemory memory{2, {}};
  Pattern p;
  p.id = "slip";
  p.summary = "slip";
  p.appeared_in = {2};
  memory.patterns.push_back(p);
  Overlay overlay{2, {{"slip", "OVERLAY-DIRECTIVE"}}};
  SkillPackage s = base_skill();

  std::string with = render_patcher_prompt(s, one_diagnosis(2), &memory, &overlay, ctx);
  std::string without = render_patcher_prompt(s, one_diagnosis(2), nullptr, nullptr, ctx);
  CHECK(with.find("OVERLAY-DIRECTIVE") != std::string::npos);
  CHECK(with.find("## Pattern memory") != std::string::npos);
  CHECK(without.find("## Pattern memory") == std::string::npos);
  CHECK(without.find("DIAG-TEXT") != std::string::npos);
  CHECK(without.find("=== references/a.md ===") != std::string::npos);
}

TEST_CASE("propose_patch repairs once, then skips") {
  PromptLibrary prompts = PromptLibrary::defaults();
  SkillPackage s = base_skill();
  MockRule bad;
  bad.role = Role::kPatcher;
  bad.turn = 1;
  bad.response.content = fenced({{"edits", {{{"op", "delete_resource"}, {"path", "references/q.md"}}}}});
  MockRule good;
  good.role = Role::kPatcher;
  good.turn = 2;
  good.last_contains = {"could not be used"};
  good.response.content = fenced({{"edits", {{{"op", "delete_resource"}, {"path", "references/a.md"}}}}});
  {
    ProviderSet providers(std::make_shared<MockProvider>(std::vector<MockRule>{bad, good}));
    PatchContext ctx{providers, prompts, 3};
    PatchProposal proposal = propose_patch(s, one_diagnosis(3), nullptr, nullptr, ctx);
    CHECK_FALSE(proposal.skipped);
    CHECK(proposal.attempts == 2);
    CHECK(proposal.patch == PatchSet{3, {DeleteResource{"references/a.md"}}});
  }
  {
    MockRule always_bad = bad;
    always_bad.turn.reset();
    ProviderSet providers(std::make_shared<MockProvider>(std::vector<MockRule>{always_bad}));
    PatchContext ctx{providers, prompts, 3};
    PatchProposal proposal = propose_patch(s, one_diagnosis(3), nullptr, nullptr, ctx);
    CHECK(proposal.skipped);
    CHECK(proposal.patch.edits.empty());
    CHECK(proposal.skip_reason.find("references/q.md") != std::string::npos);
  }
  {
    ProviderSet providers(std::make_shared<MockProvider>(std::vector<MockRule>{}));
    PatchContext ctx{providers, prompts, 3};
    CHECK(kind_of([&] { propose_patch(s, one_diagnosis(3), nullptr, nullptr, ctx); }) ==
          ErrorKind::kProviderFailure);
  }
}
