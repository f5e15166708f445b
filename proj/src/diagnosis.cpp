// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/diagnosis.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>

#include "skilltune/error.hpp"
#include "skilltune/parallel.hpp"

namespace skilltune {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

// Case-insensitive "label:" prefix; returns the rest of the line.
std::optional<std::string> labeled(std::string_view line, std::string_view label) {
  std::string t = trim(line);
  while (!t.empty() && (t.front() == '*' || t.front() == '#')) t.erase(0, 1);
  if (t.size() <= label.size()) return std::nullopt;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(t[i])) != std::tolower(static_cast<unsigned char>(label[i]))) {
      return std::nullopt;
    }
  }
  std::string rest = t.substr(label.size());
  while (!rest.empty() && (rest.front() == '*')) rest.erase(0, 1);
  if (rest.empty() || rest.front() != ':') return std::nullopt;
  std::string value = trim(std::string_view(rest).substr(1));
  while (!value.empty() && value.back() == '*') value.pop_back();
  return trim(value);
}

}  // namespace

std::string_view to_string(DiagnosisKind kind) {
  return kind == DiagnosisKind::kFailure ? "failure" : "contrastive";
}

json DiagnosisSet::to_json() const {
  json items_json = json::array();
  for (const Diagnosis& d : items) {
    items_json.push_back({{"task_id", d.task_id},
                          {"kind", to_string(d.kind)},
                          {"mechanism", d.mechanism},
                          {"cited_skill_sections", d.cited_skill_sections},
                          {"text", d.text}});
  }
  json skipped_json = json::array();
  for (const SkippedDiagnosis& s : skipped) skipped_json.push_back({{"task_id", s.task_id}, {"reason", s.reason}});
  return {{"iteration", iteration}, {"items", items_json}, {"skipped", skipped_json}};
}

DiagnosisSet DiagnosisSet::from_json(const json& j) {
  DiagnosisSet set;
  set.iteration = j.at("iteration");
  for (const auto& d : j.at("items")) {
    set.items.push_back({d.at("task_id"), d.at("kind") == "failure" ? DiagnosisKind::kFailure : DiagnosisKind::kContrastive,
                         d.at("text"), d.value("mechanism", ""),
                         d.value("cited_skill_sections", std::vector<std::string>{})});
  }
  for (const auto& s : j.at("skipped")) set.skipped.push_back({s.at("task_id"), s.at("reason")});
  return set;
}

Diagnosis parse_diagnosis(const std::string& task_id, DiagnosisKind kind, const std::string& reply) {
  Diagnosis d{task_id, kind, trim(reply), "", {}};
  std::istringstream in(d.text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto m = labeled(line, "mechanism"); m && d.mechanism.empty()) {
      d.mechanism = *m;
    } else if (auto s = labeled(line, "skill sections"); s && d.cited_skill_sections.empty()) {
      std::istringstream parts(*s);
      std::string part;
      while (std::getline(parts, part, ',')) {
        std::string p = trim(part);
        if (!p.empty() && p != "none") d.cited_skill_sections.push_back(p);
      }
    }
  }
  return d;
}

ChatRequest diagnosis_request(const SkillPackage& skill, const Task& task, const LossEvidence& evidence,
                              const DiagnosisContext& ctx) {
  ChatRequest req;
  req.stage = Stage::kDiagnosis;
  req.iteration = ctx.iteration;
  req.decoding = ctx.decoding;
  std::map<std::string, std::string> bindings = {{"skill", render_skill_tree(skill)},
                                                 {"task", ctx.environment.present(task)}};
  std::string prompt;
  if (const auto* f = std::get_if<FailedEvidence>(&evidence.branch)) {
    req.role = Role::kFailureDiagnoser;
    bindings["trajectory"] = render_trajectory(f->current, ctx.keep_turns);
    bindings["feedback"] = f->feedback.empty() ? "(none)" : f->feedback;
    prompt = render_template(ctx.prompts.get("failure_diagnoser"), bindings);
  } else {
    const auto& c = std::get<ContrastiveEvidence>(evidence.branch);
    req.role = Role::kContrastiveDiagnoser;
    bindings["success_trajectory"] = render_trajectory(c.current, ctx.keep_turns);
    bindings["initial_trajectory"] = render_trajectory(c.initial, ctx.keep_turns);
    bindings["initial_feedback"] = c.initial_feedback.empty() ? "(none)" : c.initial_feedback;
    prompt = render_template(ctx.prompts.get("contrastive_diagnoser"), bindings);
  }
  req.messages.push_back({"user", std::move(prompt), {}, {}});
  return req;
}

Diagnosis diagnose(const SkillPackage& skill, const Task& task, const LossEvidence& evidence,
                   const DiagnosisContext& ctx) {
  ChatRequest req = diagnosis_request(skill, task, evidence, ctx);
  const DiagnosisKind kind = evidence.is_failed() ? DiagnosisKind::kFailure : DiagnosisKind::kContrastive;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    req.turn = attempt;
    ChatResponse resp;
    try {
      resp = ctx.providers[req.role].complete(req);
    } catch (const Error& e) {
      throw Error(ErrorKind::kProviderFailure, evidence.task_id + ": " + e.what());
    }
    if (!trim(resp.content).empty()) return parse_diagnosis(evidence.task_id, kind, resp.content);
  }
  throw Error(ErrorKind::kEmptyDiagnosis, evidence.task_id + ": blank diagnosis after one retry");
}

DiagnosisSet diagnose_batch(const SkillPackage& skill, const std::vector<Task>& tasks,
                            const std::vector<LossEvidence>& evidence, const DiagnosisContext& ctx) {
  if (evidence.empty()) throw Error(ErrorKind::kInvalidArgument, "diagnose_batch needs a non-empty batch");
  if (tasks.size() != evidence.size()) throw Error(ErrorKind::kInvalidArgument, "tasks and evidence differ in length");
  std::vector<std::optional<Diagnosis>> results(evidence.size());
  std::vector<std::string> failures(evidence.size());
  parallel_for(evidence.size(), ctx.parallelism, [&](std::size_t i) {
    try {
      results[i] = diagnose(skill, tasks[i], evidence[i], ctx);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });
  DiagnosisSet set;
  set.iteration = ctx.iteration;
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    if (results[i]) {
      set.items.push_back(std::move(*results[i]));
    } else {
      set.skipped.push_back({evidence[i].task_id, failures[i]});
    }
  }
  if (set.items.empty()) {
    throw Error(ErrorKind::kBatchDiagnosisFailure, "all " + std::to_string(evidence.size()) + " diagnoses failed");
  }
  return set;
}

std::string render_diagnoses(const DiagnosisSet& set) {
  if (set.items.empty()) return "(none)\n";
  std::string out;
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    const Diagnosis& d = set.items[i];
    out += "### Diagnosis " + std::to_string(i + 1) + " (task " + d.task_id + ", " + std::string(to_string(d.kind)) + ")\n";
    out += d.text + "\n\n";
  }
  return out;
}

}  // namespace skilltune
