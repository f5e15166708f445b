// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/patcher.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "skilltune/diff.hpp"
#include "skilltune/error.hpp"

namespace skilltune {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

json edit_to_json(const Edit& edit) {
  return std::visit(Overloaded{
                        [](const ReplaceBody& e) -> json { return {{"op", "replace_body"}, {"content", e.text}}; },
                        [](const UpsertResource& e) -> json {
                          return {{"op", "upsert_resource"}, {"path", e.path}, {"content", e.text}};
                        },
                        [](const DeleteResource& e) -> json { return {{"op", "delete_resource"}, {"path", e.path}}; },
                        [](const ReplaceHeaderField& e) -> json {
                          return {{"op", "set_header"}, {"key", e.key}, {"value", e.value}};
                        },
                    },
                    edit);
}

Edit edit_from_json(const json& j) {
  auto field = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) {
      throw Error(ErrorKind::kUnparseablePatch, std::string("edit needs a string '") + key + "'");
    }
    return j.at(key).get<std::string>();
  };
  if (!j.is_object()) throw Error(ErrorKind::kUnparseablePatch, "edits must be objects");
  const std::string op = field("op");
  if (op == "replace_body") return ReplaceBody{field("content")};
  if (op == "upsert_resource") return UpsertResource{field("path"), field("content")};
  if (op == "delete_resource") return DeleteResource{field("path")};
  if (op == "set_header") return ReplaceHeaderField{field("key"), field("value")};
  throw Error(ErrorKind::kUnparseablePatch, "unknown edit op '" + op + "'");
}

void add_counts(PatchMagnitude& m, std::string_view before, std::string_view after) {
  DiffCounts w = word_diff(before, after);
  DiffCounts l = line_diff(before, after);
  DiffCounts c = char_diff(before, after);
  m.words_added += w.added;
  m.words_removed += w.removed;
  m.lines_added += l.added;
  m.lines_removed += l.removed;
  m.chars_added += c.added;
  m.chars_removed += c.removed;
}

}  // namespace

json PatchSet::to_json() const {
  json edits_json = json::array();
  for (const Edit& e : edits) edits_json.push_back(edit_to_json(e));
  return {{"iteration", iteration}, {"edits", edits_json}};
}

PatchSet PatchSet::from_json(const json& j) {
  PatchSet p;
  p.iteration = j.at("iteration");
  for (const auto& e : j.at("edits")) p.edits.push_back(edit_from_json(e));
  return p;
}

std::vector<std::string> check_patch(const PatchSet& patch, const SkillPackage& skill) {
  std::vector<std::string> problems;
  std::set<std::string> live;
  for (const Resource& r : skill.resources) live.insert(r.path);
  int bodies = 0;
  for (const Edit& edit : patch.edits) {
    std::visit(Overloaded{
                   [&](const ReplaceBody& e) {
                     if (++bodies > 1) problems.push_back("more than one replace_body");
                     if (e.text.find_first_not_of(" \t\r\n") == std::string::npos) {
                       problems.push_back("replace_body would leave SKILL.md empty");
                     }
                   },
                   [&](const UpsertResource& e) {
                     if (!is_legal_resource_path(e.path)) {
                       problems.push_back("resource path '" + e.path + "' is not references/<name>.md");
                     } else {
                       live.insert(e.path);
                     }
                   },
                   [&](const DeleteResource& e) {
                     if (!live.erase(e.path)) problems.push_back("delete of missing resource '" + e.path + "'");
                   },
                   [&](const ReplaceHeaderField& e) {
                     if (e.key == "name") problems.push_back("the skill name cannot be changed");
                     if (e.key.empty()) problems.push_back("empty header key");
                     if (e.key == "description" && e.value.find_first_not_of(" \t") == std::string::npos) {
                       problems.push_back("description cannot be emptied");
                     }
                   },
               },
               edit);
  }
  return problems;
}

PatchSet parse_patch_reply(std::string_view reply, const SkillPackage& skill, int iteration) {
  std::optional<std::string> block = extract_json_block(reply);
  if (!block) throw Error(ErrorKind::kUnparseablePatch, "reply has no JSON block");
  json doc;
  try {
    doc = json::parse(*block);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kUnparseablePatch, std::string("JSON block does not parse: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("edits") || !doc.at("edits").is_array()) {
    throw Error(ErrorKind::kUnparseablePatch, "expected an object with an \"edits\" array");
  }
  PatchSet patch;
  patch.iteration = iteration;
  for (const json& e : doc.at("edits")) patch.edits.push_back(edit_from_json(e));
  std::vector<std::string> problems = check_patch(patch, skill);
  if (!problems.empty()) throw Error(ErrorKind::kUnparseablePatch, problems.front());
  return patch;
}

SkillPackage apply_patch(const SkillPackage& skill, const PatchSet& patch) {
  SkillPackage out = skill;
  for (const Edit& edit : patch.edits) {
    std::visit(Overloaded{
                   [&](const ReplaceBody& e) { out.body = e.text; },
                   [&](const UpsertResource& e) {
                     auto it = std::find_if(out.resources.begin(), out.resources.end(),
                                            [&](const Resource& r) { return r.path == e.path; });
                     if (it != out.resources.end()) {
                       it->text = e.text;
                     } else {
                       out.resources.push_back({e.path, e.text});
                     }
                   },
                   [&](const DeleteResource& e) {
                     auto it = std::find_if(out.resources.begin(), out.resources.end(),
                                            [&](const Resource& r) { return r.path == e.path; });
                     if (it == out.resources.end()) throw Error(ErrorKind::kDeleteOfMissingResource, e.path);
                     out.resources.erase(it);
                   },
                   [&](const ReplaceHeaderField& e) {
                     if (e.key == "name" && e.value != out.header.name()) {
                       throw Error(ErrorKind::kResultInvalid, "patch renames the skill");
                     }
                     if (out.header.get(e.key) != e.value) out.header.set(e.key, e.value);
                   },
               },
               edit);
  }
  std::sort(out.resources.begin(), out.resources.end(),
            [](const Resource& a, const Resource& b) { return a.path < b.path; });
  std::vector<Violation> violations = validate(out);
  if (!violations.empty()) {
    throw Error(ErrorKind::kResultInvalid,
                std::string(to_string(violations.front().kind)) + " at " + violations.front().element);
  }
  return out;
}

PatchMagnitude patch_magnitude(const SkillPackage& before, const SkillPackage& after) {
  PatchMagnitude m;
  add_counts(m, before.render_skill_file(), after.render_skill_file());
  std::map<std::string, std::pair<std::string_view, std::string_view>> files;
  for (const Resource& r : before.resources) files[r.path].first = r.text;
  for (const Resource& r : after.resources) files[r.path].second = r.text;
  for (const auto& [path, texts] : files) add_counts(m, texts.first, texts.second);
  return m;
}

std::string render_patcher_prompt(const SkillPackage& skill, const DiagnosisSet& diagnoses, const PatternMemory* memory,
                                  const Overlay* overlay, const PatchContext& ctx) {
  std::string momentum_context;
  if (memory && overlay) {
    momentum_context = render_template(ctx.prompts.get("patcher_momentum"),
                                       {{"memory", render_memory(*memory)}, {"overlay", render_overlay(*overlay, *memory)}});
  }
  return render_template(ctx.prompts.get("patcher"), {{"iteration", std::to_string(ctx.iteration)},
                                                      {"skill_tree", render_skill_tree(skill)},
                                                      {"diagnoses", render_diagnoses(diagnoses)},
                                                      {"momentum_context", momentum_context}});
}

PatchProposal propose_patch(const SkillPackage& skill, const DiagnosisSet& diagnoses, const PatternMemory* memory,
                            const Overlay* overlay, const PatchContext& ctx) {
  ChatRequest req;
  req.role = Role::kPatcher;
  req.stage = Stage::kPatch;
  req.iteration = ctx.iteration;
  req.decoding = ctx.decoding;
  req.messages.push_back({"user", render_patcher_prompt(skill, diagnoses, memory, overlay, ctx), {}, {}});

  PatchProposal out;
  out.patch.iteration = ctx.iteration;
  std::string last_error;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    req.turn = attempt;
    ++out.attempts;
    ChatResponse resp;
    try {
      resp = ctx.providers[Role::kPatcher].complete(req);
    } catch (const Error& e) {
      throw Error(ErrorKind::kProviderFailure, std::string("patcher: ") + e.what());
    }
    try {
      out.patch = parse_patch_reply(resp.content, skill, ctx.iteration);
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kUnparseablePatch) throw;
      last_error = e.what();
      req.messages.push_back({"assistant", resp.content, {}, {}});
      req.messages.push_back({"user", render_template(ctx.prompts.get("repair"), {{"error", last_error}}), {}, {}});
    }
  }
  spdlog::warn("patch iteration {}: {}; skill left unchanged", ctx.iteration, last_error);
  out.patch.edits.clear();
  out.skipped = true;
  out.skip_reason = last_error;
  return out;
}

}  // namespace skilltune
