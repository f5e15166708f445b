// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "skilltune/error.hpp"
#include "skilltune/io.hpp"
#include "skilltune/skill_package.hpp"

using namespace skilltune;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("skilltune_pkg_" + name);
  fs::remove_all(dir);
  return dir;
}

SkillPackage tiny() {
  SkillPackage pkg;
  pkg.header = Metadata::parse("name: tiny\ndescription: A tiny skill.\n");
  pkg.body = "a b\nc";
  pkg.resources = {{"references/x.md", "x y z"}};
  return pkg;
}

}  // namespace

TEST_CASE("layer metrics of a tiny package") {
  LayerMetrics m = layer_metrics(tiny());
  CHECK(m.l2_lines == 2);
  CHECK(m.l2_words == 3);
  CHECK(m.l2_chars == 5);
  CHECK(m.l3_files == 1);
  CHECK(m.l3_words == 3);
  CHECK(m.l3_chars == 5);
}

TEST_CASE("text measures") {
  CHECK(count_words("") == 0);
  CHECK(count_words("  one\ttwo\n three  ") == 3);
  CHECK(count_lines("") == 0);
  CHECK(count_lines("a\n") == 1);
  CHECK(count_lines("a\n\nb") == 3);
  CHECK(count_chars("h\xC3\xA9llo") == 5);
}

TEST_CASE("front matter parsing") {
  auto [meta, body] = parse_skill_file("---\nname: demo\ndescription: \"Quoted: yes\"\nversion: 2\n---\nBody\n");
  CHECK(meta.name() == "demo");
  CHECK(meta.description() == "Quoted: yes");
  CHECK(meta.get("version") == "2");
  CHECK(body == "Body\n");
  CHECK(meta.extra().size() == 1);

  CHECK_THROWS_AS(parse_skill_file("name: demo\n"), Error);
  CHECK_THROWS_AS(parse_skill_file("---\nname: demo\n"), Error);
  try {
    parse_skill_file("---\nname: x\n");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMalformedFrontMatter);
  }
}

TEST_CASE("header keeps unknown keys and comments byte-identical") {
  const std::string block = "# owner: docs team\nname: demo\nlicense: MIT\ndescription: >\n  folded\n  text\n\nx-extra: [a, b]\n";
  Metadata meta = Metadata::parse(block);
  CHECK(meta.serialize() == block);
  CHECK(meta.description() == "folded text");
  meta.set("license", "Apache-2.0");
  CHECK(Metadata::parse(meta.serialize()).get("license") == "Apache-2.0");
  meta.set("note", "has: colon");
  CHECK(Metadata::parse(meta.serialize()).get("note") == "has: colon");
}

TEST_CASE("resource paths") {
  CHECK(is_legal_resource_path("references/a.md"));
  CHECK(is_legal_resource_path("references/Formula_tips-2.md"));
  CHECK_FALSE(is_legal_resource_path("references/a.txt"));
  CHECK_FALSE(is_legal_resource_path("references/sub/a.md"));
  CHECK_FALSE(is_legal_resource_path("references/.hidden.md"));
  CHECK_FALSE(is_legal_resource_path("references/../a.md"));
  CHECK_FALSE(is_legal_resource_path("notes/a.md"));
  CHECK_FALSE(is_legal_resource_path("references/a b.md"));
}

TEST_CASE("save and load round trip") {
  fs::path dir = scratch("roundtrip");
  SkillPackage pkg = tiny();
  pkg.resources.push_back({"references/a.md", "alpha\n"});
  save_package(pkg, dir);
  SkillPackage loaded = load_package(dir);
  CHECK(loaded.header == pkg.header);
  CHECK(loaded.body == pkg.body);
  REQUIRE(loaded.resources.size() == 2);
  CHECK(loaded.resources[0].path == "references/a.md");
  CHECK(package_hash(loaded) != 0);

  // Saving a smaller package removes stale files.
  loaded.resources.pop_back();
  save_package(loaded, dir);
  CHECK_FALSE(fs::exists(dir / "references" / "x.md"));
  CHECK(load_package(dir).resources.size() == 1);
}

TEST_CASE("CRLF input is normalized on load") {
  fs::path dir = scratch("crlf");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "SKILL.md", std::ios::binary);
    f << "---\r\nname: w\r\ndescription: d\r\n---\r\nline one\r\nline two\r\n";
  }
  SkillPackage pkg = load_package(dir);
  CHECK(pkg.body == "line one\nline two\n");
  CHECK(layer_metrics(pkg).l2_lines == 2);
}

TEST_CASE("load errors") {
  fs::path dir = scratch("errors");
  fs::create_directories(dir);
  try {
    load_package(dir);
    FAIL("expected MissingBody");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingBody);
  }
  write_text(dir / "SKILL.md", "---\nname: a\ndescription: b\n---\nbody\n");
  write_text(dir / "references" / "notes.txt", "x");
  try {
    load_package(dir);
    FAIL("expected IllegalResourcePath");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kIllegalResourcePath);
  }
}

TEST_CASE("save refuses illegal or duplicate resources") {
  SkillPackage pkg = tiny();
  pkg.resources.push_back({"references/x.md", "dup"});
  CHECK_THROWS_AS(save_package(pkg, scratch("dup")), Error);
  pkg = tiny();
  pkg.resources.push_back({"../evil.md", "x"});
  CHECK_THROWS_AS(save_package(pkg, scratch("evil")), Error);
}

TEST_CASE("validation") {
  CHECK(validate(tiny()).empty());
  SkillPackage pkg = tiny();
  pkg.body = "  \n";
  pkg.header = Metadata::parse("description: d\n");
  pkg.resources.push_back({"references/x.md", "again"});
  auto v = validate(pkg);
  auto has = [&](ViolationKind k) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.kind == k; });
  };
  CHECK(has(ViolationKind::kEmptyBody));
  CHECK(has(ViolationKind::kMissingName));
  CHECK(has(ViolationKind::kDuplicateResource));
  CHECK_FALSE(has(ViolationKind::kMissingDescription));
}

TEST_CASE("fixture skills load with the documented shapes") {
  const fs::path root = SKILLTUNE_FIXTURES;
  LayerMetrics llm = layer_metrics(load_package(root / "skills" / "llm_generated"));
  CHECK(llm.l2_lines == 40);
  CHECK(llm.l3_files == 0);
  LayerMetrics third = layer_metrics(load_package(root / "skills" / "third_party"));
  CHECK(third.l2_lines == 125);
  CHECK(third.l3_files == 4);
  LayerMetrics tuned = layer_metrics(load_package(root / "skills" / "optimized_seed0"));
  CHECK(tuned.l2_lines == 157);
  CHECK(tuned.l3_files == 2);
}

TEST_CASE("tree rendering lists every file") {
  std::string tree = render_skill_tree(tiny());
  CHECK(tree.find("=== SKILL.md ===") != std::string::npos);
  CHECK(tree.find("=== references/x.md ===") != std::string::npos);
}
