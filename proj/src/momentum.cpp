// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/momentum.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "skilltune/error.hpp"

namespace skilltune {

using nlohmann::json;

namespace {

PatternCharacter character_from(std::string_view s) {
  if (s == "operation") return PatternCharacter::kOperation;
  if (s == "workflow") return PatternCharacter::kWorkflow;
  throw Error(ErrorKind::kSchemaViolation, "character must be operation or workflow, got '" + std::string(s) + "'");
}

PatternStatus status_from(std::string_view s) {
  for (PatternStatus st : {PatternStatus::kNew, PatternStatus::kRecurring, PatternStatus::kAbsorbed,
                           PatternStatus::kUnresolved, PatternStatus::kRetired}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorKind::kSchemaViolation, "unknown status '" + std::string(s) + "'");
}

json pattern_to_json(const Pattern& p) {
  json refs = json::array();
  for (const EvidenceRef& r : p.evidence_refs) refs.push_back({{"iteration", r.iteration}, {"task_id", r.task_id}});
  json j = {{"id", p.id},
            {"summary", p.summary},
            {"character", to_string(p.character)},
            {"appeared_in", p.appeared_in},
            {"status", to_string(p.status)},
            {"evidence", refs},
            {"skill_anchor", p.skill_anchor}};
  if (!p.retired_reason.empty()) j["retired_reason"] = p.retired_reason;
  return j;
}

std::vector<EvidenceRef> refs_from_json(const json& j) {
  std::vector<EvidenceRef> out;
  if (!j.is_array()) throw Error(ErrorKind::kSchemaViolation, "evidence must be an array");
  for (const auto& r : j) {
    if (!r.is_object() || !r.contains("iteration") || !r.at("iteration").is_number_integer()) {
      throw Error(ErrorKind::kSchemaViolation, "evidence entries need an integer iteration");
    }
    out.push_back({r.at("iteration").get<int>(), r.value("task_id", "")});
  }
  return out;
}

const json& require(const json& obj, const char* key) {
  if (!obj.contains(key)) throw Error(ErrorKind::kSchemaViolation, std::string("missing field '") + key + "'");
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_string()) throw Error(ErrorKind::kSchemaViolation, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<int> require_iterations(const json& obj) {
  const json& v = require(obj, "appeared_in");
  if (!v.is_array()) throw Error(ErrorKind::kSchemaViolation, "appeared_in must be an array");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) throw Error(ErrorKind::kSchemaViolation, "appeared_in entries must be integers");
    out.push_back(x.get<int>());
  }
  return out;
}

void check_pattern(const Pattern& p, int iteration, std::vector<std::string>& problems) {
  const std::string who = "pattern '" + p.id + "'";
  if (p.summary.empty()) problems.push_back(who + ": empty summary");
  if (p.appeared_in.empty()) problems.push_back(who + ": appeared_in is empty");
  for (std::size_t i = 0; i < p.appeared_in.size(); ++i) {
    if (p.appeared_in[i] < 1) problems.push_back(who + ": appeared_in entries must be >= 1");
    if (i > 0 && p.appeared_in[i] <= p.appeared_in[i - 1]) {
      problems.push_back(who + ": appeared_in must be strictly increasing");
    }
  }
  if (!p.appeared_in.empty() && p.appeared_in.back() > iteration) {
    problems.push_back(who + ": appeared_in lists iteration " + std::to_string(p.appeared_in.back()) +
                       " beyond " + std::to_string(iteration));
  }
  if (p.status == PatternStatus::kNew && p.appeared_in.size() != 1) {
    problems.push_back(who + ": status new requires exactly one appearance");
  }
  if (p.status == PatternStatus::kRetired && p.retired_reason.empty()) {
    problems.push_back(who + ": retirement needs a reason");
  }
}

}  // namespace

std::string_view to_string(PatternCharacter c) { return c == PatternCharacter::kOperation ? "operation" : "workflow"; }

std::string_view to_string(PatternStatus s) {
  switch (s) {
    case PatternStatus::kNew: return "new";
    case PatternStatus::kRecurring: return "recurring";
    case PatternStatus::kAbsorbed: return "absorbed";
    case PatternStatus::kUnresolved: return "unresolved";
    case PatternStatus::kRetired: return "retired";
  }
  return "unknown";
}

const Pattern* PatternMemory::find(std::string_view id) const {
  for (const Pattern& p : patterns) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

std::vector<std::string> PatternMemory::check() const {
  std::vector<std::string> problems;
  std::set<std::string> ids;
  for (const Pattern& p : patterns) {
    if (p.id.empty()) problems.push_back("pattern with empty id");
    if (!ids.insert(p.id).second) problems.push_back("duplicate pattern id '" + p.id + "'");
    check_pattern(p, iteration, problems);
  }
  return problems;
}

json PatternMemory::to_json() const {
  json ps = json::array();
  for (const Pattern& p : patterns) ps.push_back(pattern_to_json(p));
  return {{"iteration", iteration}, {"patterns", ps}};
}

PatternMemory PatternMemory::from_json(const json& j) {
  PatternMemory m;
  try {
    m.iteration = j.at("iteration");
    for (const auto& pj : j.at("patterns")) {
      Pattern p;
      p.id = pj.at("id");
      p.summary = pj.at("summary");
      p.character = character_from(pj.at("character").get<std::string>());
      p.appeared_in = pj.at("appeared_in").get<std::vector<int>>();
      p.status = status_from(pj.at("status").get<std::string>());
      p.evidence_refs = refs_from_json(pj.value("evidence", json::array()));
      p.skill_anchor = pj.value("skill_anchor", "");
      p.retired_reason = pj.value("retired_reason", "");
      m.patterns.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kCorruptRunDir, std::string("bad memory.json: ") + e.what());
  }
  return m;
}

json Overlay::to_json() const {
  json items = json::array();
  for (const OverlayItem& o : focus) items.push_back({{"pattern_id", o.pattern_id}, {"directive", o.directive}});
  return {{"iteration", iteration}, {"focus", items}};
}

Overlay Overlay::from_json(const json& j) {
  Overlay o;
  o.iteration = j.at("iteration");
  for (const auto& item : j.at("focus")) o.focus.push_back({item.at("pattern_id"), item.at("directive")});
  return o;
}

std::optional<std::string> extract_json_block(std::string_view reply) {
  std::size_t fence = reply.find("```json");
  if (fence != std::string_view::npos) {
    std::size_t start = reply.find('\n', fence);
    if (start != std::string_view::npos) {
      std::size_t end = reply.find("```", start + 1);
      if (end != std::string_view::npos) {
        std::string_view inner = reply.substr(start + 1, end - start - 1);
        while (!inner.empty() && std::isspace(static_cast<unsigned char>(inner.back()))) inner.remove_suffix(1);
        return std::string(inner);
      }
    }
  }
  std::size_t open = reply.find('{');
  std::size_t close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  return std::string(reply.substr(open, close - open + 1));
}

std::string pattern_slug(std::string_view summary, const std::vector<std::string>& taken) {
  std::string slug;
  bool dash = false;
  for (char c : summary) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      if (dash && !slug.empty()) slug += '-';
      slug += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      dash = false;
    } else {
      dash = true;
    }
    if (slug.size() >= 40) break;
  }
  while (!slug.empty() && slug.back() == '-') slug.pop_back();
  if (slug.empty()) slug = "pattern";
  std::string candidate = slug;
  for (int n = 2; std::find(taken.begin(), taken.end(), candidate) != taken.end(); ++n) {
    candidate = slug + "-" + std::to_string(n);
  }
  return candidate;
}

std::pair<PatternMemory, Overlay> apply_momentum_reply(const PatternMemory& previous, int iteration,
                                                       std::string_view reply) {
  std::optional<std::string> block = extract_json_block(reply);
  if (!block) throw Error(ErrorKind::kSchemaViolation, "reply has no JSON block");
  json doc;
  try {
    doc = json::parse(*block);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kSchemaViolation, std::string("JSON block does not parse: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("patterns") || !doc.at("patterns").is_array()) {
    throw Error(ErrorKind::kSchemaViolation, "expected an object with a \"patterns\" array");
  }

  PatternMemory next;
  next.iteration = iteration;
  next.patterns = previous.patterns;
  std::vector<std::string> taken;
  for (const Pattern& p : previous.patterns) taken.push_back(p.id);
  std::map<std::string, std::string> ref_to_id;
  std::vector<std::string> problems;

  for (const json& pj : doc.at("patterns")) {
    if (!pj.is_object()) throw Error(ErrorKind::kSchemaViolation, "pattern entries must be objects");
    const std::string ref = require_string(pj, "ref");
    if (ref.empty()) throw Error(ErrorKind::kSchemaViolation, "empty pattern ref");
    if (ref_to_id.contains(ref)) throw Error(ErrorKind::kSchemaViolation, "pattern ref '" + ref + "' appears twice");

    Pattern incoming;
    incoming.summary = require_string(pj, "summary");
    incoming.character = character_from(require_string(pj, "character"));
    incoming.status = status_from(require_string(pj, "status"));
    incoming.appeared_in = require_iterations(pj);
    incoming.evidence_refs = refs_from_json(pj.value("evidence", json::array()));
    incoming.skill_anchor = pj.value("skill_anchor", "");
    incoming.retired_reason = pj.value("retired_reason", "");

    if (previous.find(ref)) {
      auto existing = std::find_if(next.patterns.begin(), next.patterns.end(), [&](const Pattern& p) { return p.id == ref; });
      // History may only gain the current iteration.
      const std::vector<int>& old = existing->appeared_in;
      if (std::is_sorted(incoming.appeared_in.begin(), incoming.appeared_in.end()) &&
          !std::includes(incoming.appeared_in.begin(), incoming.appeared_in.end(), old.begin(), old.end())) {
        problems.push_back("pattern '" + ref + "': appeared_in drops earlier iterations");
      }
      for (int it : incoming.appeared_in) {
        if (std::find(old.begin(), old.end(), it) == old.end() && it != iteration) {
          problems.push_back("pattern '" + ref + "': appeared_in may only gain iteration " + std::to_string(iteration));
        }
      }
      incoming.id = existing->id;
      std::vector<EvidenceRef> merged = existing->evidence_refs;
      merged.insert(merged.end(), incoming.evidence_refs.begin(), incoming.evidence_refs.end());
      std::sort(merged.begin(), merged.end());
      merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
      incoming.evidence_refs = std::move(merged);
      *existing = std::move(incoming);
      ref_to_id[ref] = ref;
    } else {
      if (incoming.appeared_in != std::vector<int>{iteration}) {
        problems.push_back("new pattern '" + ref + "': appeared_in must be [" + std::to_string(iteration) + "]");
      }
      incoming.id = pattern_slug(incoming.summary, taken);
      taken.push_back(incoming.id);
      ref_to_id[ref] = incoming.id;
      next.patterns.push_back(std::move(incoming));
    }
  }

  for (std::string& p : next.check()) problems.push_back(std::move(p));
  if (!problems.empty()) {
    std::string msg = problems.front();
    if (problems.size() > 1) msg += " (+" + std::to_string(problems.size() - 1) + " more)";
    throw Error(ErrorKind::kSchemaViolation, msg);
  }

  Overlay overlay;
  overlay.iteration = iteration;
  if (doc.contains("overlay")) {
    if (!doc.at("overlay").is_array()) throw Error(ErrorKind::kSchemaViolation, "overlay must be an array");
    for (const json& oj : doc.at("overlay")) {
      if (!oj.is_object()) throw Error(ErrorKind::kSchemaViolation, "overlay entries must be objects");
      std::string ref = require_string(oj, "ref");
      std::string directive = require_string(oj, "directive");
      std::string id;
      if (auto it = ref_to_id.find(ref); it != ref_to_id.end()) {
        id = it->second;
      } else if (next.find(ref)) {
        id = ref;
      } else {
        throw Error(ErrorKind::kSchemaViolation, "overlay names unknown pattern '" + ref + "'");
      }
      if (directive.empty()) throw Error(ErrorKind::kSchemaViolation, "overlay directive for '" + ref + "' is empty");
      overlay.focus.push_back({id, directive});
    }
  }
  return {std::move(next), std::move(overlay)};
}

std::string render_memory(const PatternMemory& memory) {
  if (memory.patterns.empty()) return "(empty)\n";
  return memory.to_json().at("patterns").dump(2) + "\n";
}

std::string render_overlay(const Overlay& overlay, const PatternMemory& memory) {
  if (overlay.focus.empty()) return "(empty)\n";
  std::string out;
  for (const OverlayItem& item : overlay.focus) {
    out += "- [" + item.pattern_id + "] " + item.directive;
    if (const Pattern* p = memory.find(item.pattern_id)) {
      out += " (" + std::string(to_string(p->status)) + ", " + std::string(to_string(p->character)) + ", seen " +
             std::to_string(p->appeared_in.size()) + "x)";
    }
    out += "\n";
  }
  return out;
}

ChatRequest momentum_request(const PatternMemory& previous, const DiagnosisSet& diagnoses, const SkillPackage& skill,
                             const MomentumContext& ctx) {
  ChatRequest req;
  req.role = Role::kMomentum;
  req.stage = Stage::kMomentum;
  req.iteration = ctx.iteration;
  req.decoding = ctx.decoding;
  req.messages.push_back({"user",
                          render_template(ctx.prompts.get("momentum"),
                                          {{"iteration", std::to_string(ctx.iteration)},
                                           {"previous_iteration", std::to_string(previous.iteration)},
                                           {"skill", render_skill_tree(skill)},
                                           {"memory", render_memory(previous)},
                                           {"diagnoses", render_diagnoses(diagnoses)}}),
                          {},
                          {}});
  return req;
}

MomentumUpdate update_momentum(const PatternMemory& previous, const DiagnosisSet& diagnoses, const SkillPackage& skill,
                               const MomentumContext& ctx) {
  if (previous.iteration != ctx.iteration - 1 || diagnoses.iteration != ctx.iteration) {
    throw Error(ErrorKind::kInvalidArgument, "momentum inputs are from different iterations");
  }
  ChatRequest req = momentum_request(previous, diagnoses, skill, ctx);
  MomentumUpdate out;
  std::string last_error;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    req.turn = attempt;
    ++out.attempts;
    ChatResponse resp;
    try {
      resp = ctx.providers[Role::kMomentum].complete(req);
    } catch (const Error& e) {
      throw Error(ErrorKind::kProviderFailure, std::string("momentum: ") + e.what());
    }
    try {
      std::tie(out.memory, out.overlay) = apply_momentum_reply(previous, ctx.iteration, resp.content);
      return out;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kSchemaViolation) throw;
      last_error = e.what();
      req.messages.push_back({"assistant", resp.content, {}, {}});
      req.messages.push_back({"user", render_template(ctx.prompts.get("repair"), {{"error", last_error}}), {}, {}});
    }
  }
  spdlog::warn("momentum iteration {}: {}; keeping previous memory", ctx.iteration, last_error);
  out.memory = previous;
  out.memory.iteration = ctx.iteration;
  out.overlay = Overlay{ctx.iteration, {}};
  out.fallback = true;
  out.fallback_reason = last_error;
  return out;
}

std::vector<DynamicsRow> derived_metrics(const std::vector<PatternMemory>& history) {
  std::vector<DynamicsRow> rows;
  std::set<std::string> seen;
  for (const PatternMemory& m : history) {
    DynamicsRow row;
    row.iteration = m.iteration;
    for (const Pattern& p : m.patterns) {
      seen.insert(p.id);
      if (!p.appeared_in.empty() && p.appeared_in.front() == m.iteration) ++row.fresh;
      if (std::find(p.appeared_in.begin(), p.appeared_in.end(), m.iteration) != p.appeared_in.end()) ++row.active;
    }
    row.cumulative = seen.size();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace skilltune
