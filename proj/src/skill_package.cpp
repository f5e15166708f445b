// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/skill_package.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "skilltune/error.hpp"
#include "skilltune/io.hpp"

namespace skilltune {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kDelimiter = "---";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_key_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

// Decodes the small YAML subset skill headers use: plain, quoted, and
// block (| or >) scalars.
std::string decode_scalar(std::string_view raw) {
  std::vector<std::string_view> lines = split_lines(raw);
  if (lines.empty()) return "";
  std::string_view first = trim(lines.front());
  if (first == "|" || first == ">" || first == "|-" || first == ">-") {
    const bool literal = first.front() == '|';
    std::string out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      std::string_view line = trim(lines[i]);
      if (!out.empty()) out += literal ? "\n" : " ";
      out += line;
    }
    return out;
  }
  std::string joined(first);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    joined += " ";
    joined += line;
  }
  if (joined.size() >= 2 && joined.front() == '"' && joined.back() == '"') {
    try {
      return nlohmann::json::parse(joined).get<std::string>();
    } catch (const nlohmann::json::exception&) {
      return joined.substr(1, joined.size() - 2);
    }
  }
  if (joined.size() >= 2 && joined.front() == '\'' && joined.back() == '\'') {
    std::string out;
    for (std::size_t i = 1; i + 1 < joined.size(); ++i) {
      out.push_back(joined[i]);
      if (joined[i] == '\'' && joined[i + 1] == '\'') ++i;
    }
    return out;
  }
  return joined;
}

std::string encode_scalar(std::string_view value) {
  bool needs_quotes = value.empty() || value.find('\n') != std::string_view::npos ||
                      value.find(": ") != std::string_view::npos || value.find(" #") != std::string_view::npos ||
                      is_space(value.front()) || is_space(value.back());
  if (!needs_quotes) {
    constexpr std::string_view kSpecial = "\"'{}[]&*!|>%@`#,?:-";
    needs_quotes = kSpecial.find(value.front()) != std::string_view::npos;
  }
  if (!needs_quotes) return " " + std::string(value);
  return " " + nlohmann::json(std::string(value)).dump();
}

std::string_view resource_name(std::string_view path) {
  path.remove_prefix(kReferencesDir.size() + 1);
  path.remove_suffix(3);
  return path;
}

}  // namespace

Metadata Metadata::parse(std::string_view block) {
  Metadata meta;
  for (std::string_view line : split_lines(block)) {
    const bool continuation = !line.empty() && (line.front() == ' ' || line.front() == '\t');
    if (continuation && !meta.entries_.empty() && !meta.entries_.back().key.empty()) {
      meta.entries_.back().raw_value += "\n";
      meta.entries_.back().raw_value += line;
      continue;
    }
    std::size_t colon = line.find(':');
    bool keyed = colon != std::string_view::npos && colon > 0 && line.front() != '#' &&
                 std::all_of(line.begin(), line.begin() + static_cast<std::ptrdiff_t>(colon), is_key_char);
    if (keyed) {
      meta.entries_.push_back({std::string(line.substr(0, colon)), std::string(line.substr(colon + 1))});
    } else {
      meta.entries_.push_back({"", std::string(line)});
    }
  }
  return meta;
}

std::string Metadata::serialize() const {
  std::string out;
  for (const HeaderEntry& entry : entries_) {
    if (!entry.key.empty()) {
      out += entry.key;
      out += ':';
    }
    out += entry.raw_value;
    out += '\n';
  }
  return out;
}

std::optional<std::string> Metadata::get(std::string_view key) const {
  for (const HeaderEntry& entry : entries_) {
    if (!entry.key.empty() && entry.key == key) return decode_scalar(entry.raw_value);
  }
  return std::nullopt;
}

void Metadata::set(std::string_view key, std::string_view value) {
  if (key.empty() || !std::all_of(key.begin(), key.end(), is_key_char)) {
    throw Error(ErrorKind::kInvalidArgument, "illegal header key '" + std::string(key) + "'");
  }
  for (HeaderEntry& entry : entries_) {
    if (entry.key == key) {
      entry.raw_value = encode_scalar(value);
      return;
    }
  }
  entries_.push_back({std::string(key), encode_scalar(value)});
}

std::vector<std::pair<std::string, std::string>> Metadata::extra() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const HeaderEntry& entry : entries_) {
    if (entry.key.empty() || entry.key == "name" || entry.key == "description") continue;
    out.emplace_back(entry.key, decode_scalar(entry.raw_value));
  }
  return out;
}

const Resource* SkillPackage::find_resource(std::string_view path) const {
  for (const Resource& r : resources) {
    if (r.path == path) return &r;
  }
  return nullptr;
}

std::string SkillPackage::render_skill_file() const {
  std::string out;
  out += kDelimiter;
  out += '\n';
  out += header.serialize();
  out += kDelimiter;
  out += '\n';
  out += body;
  return out;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kIllegalResourcePath: return "IllegalResourcePath";
    case ViolationKind::kDuplicateResource: return "DuplicateResource";
    case ViolationKind::kEmptyBody: return "EmptyBody";
    case ViolationKind::kMissingName: return "MissingName";
    case ViolationKind::kMissingDescription: return "MissingDescription";
  }
  return "Unknown";
}

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

std::size_t count_lines(std::string_view text) {
  if (text.empty()) return 0;
  std::size_t lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  return text.back() == '\n' ? lines : lines + 1;
}

std::size_t count_chars(std::string_view text) {
  return static_cast<std::size_t>(
      std::count_if(text.begin(), text.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

bool is_legal_resource_path(std::string_view path) {
  constexpr std::string_view kSuffix = ".md";
  if (path.size() <= kReferencesDir.size() + 1 + kSuffix.size()) return false;
  if (path.substr(0, kReferencesDir.size()) != kReferencesDir || path[kReferencesDir.size()] != '/') return false;
  if (path.substr(path.size() - kSuffix.size()) != kSuffix) return false;
  std::string_view name = resource_name(path);
  if (name.front() == '.') return false;
  return std::all_of(name.begin(), name.end(), is_key_char);
}

std::pair<Metadata, std::string> parse_skill_file(std::string_view text) {
  std::size_t first_nl = text.find('\n');
  std::string_view first_line = text.substr(0, first_nl);
  if (first_line != kDelimiter) {
    throw Error(ErrorKind::kMalformedFrontMatter, "SKILL.md must open with a '---' line");
  }
  std::size_t pos = first_nl == std::string_view::npos ? text.size() : first_nl + 1;
  const std::size_t header_start = pos;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    if (text.substr(pos, end - pos) == kDelimiter) {
      Metadata header = Metadata::parse(text.substr(header_start, pos - header_start));
      std::size_t body_start = nl == std::string_view::npos ? text.size() : nl + 1;
      return {std::move(header), std::string(text.substr(body_start))};
    }
    pos = end + 1;
  }
  throw Error(ErrorKind::kMalformedFrontMatter, "unterminated front-matter block");
}

SkillPackage load_package(const fs::path& dir) {
  const fs::path skill_file = dir / kSkillBodyFile;
  if (!fs::is_regular_file(skill_file)) {
    throw Error(ErrorKind::kMissingBody, "no " + std::string(kSkillBodyFile) + " in " + dir.string());
  }
  SkillPackage pkg;
  std::tie(pkg.header, pkg.body) = parse_skill_file(normalize_newlines(read_text(skill_file)));

  const fs::path refs = dir / kReferencesDir;
  if (fs::is_directory(refs)) {
    for (const auto& entry : fs::recursive_directory_iterator(refs)) {
      if (entry.is_directory()) continue;
      std::string rel = fs::relative(entry.path(), dir).generic_string();
      if (!is_legal_resource_path(rel)) {
        throw Error(ErrorKind::kIllegalResourcePath, rel);
      }
      pkg.resources.push_back({rel, normalize_newlines(read_text(entry.path()))});
    }
  }
  std::sort(pkg.resources.begin(), pkg.resources.end(),
            [](const Resource& a, const Resource& b) { return a.path < b.path; });
  return pkg;
}

void save_package(const SkillPackage& pkg, const fs::path& dir) {
  std::set<std::string> paths;
  for (const Resource& r : pkg.resources) {
    if (!is_legal_resource_path(r.path)) throw Error(ErrorKind::kIllegalResourcePath, r.path);
    if (!paths.insert(r.path).second) throw Error(ErrorKind::kIllegalResourcePath, "duplicate " + r.path);
  }
  SkillPackage normalized = pkg;
  normalized.body = normalize_newlines(pkg.body);
  write_text(dir / kSkillBodyFile, normalize_newlines(normalized.render_skill_file()));

  const fs::path refs = dir / kReferencesDir;
  std::error_code ec;
  if (fs::is_directory(refs)) {
    std::vector<fs::path> stale;
    for (const auto& entry : fs::directory_iterator(refs)) {
      std::string rel = fs::relative(entry.path(), dir).generic_string();
      if (!paths.contains(rel)) stale.push_back(entry.path());
    }
    for (const fs::path& p : stale) fs::remove_all(p, ec);
  }
  for (const std::string& path : paths) {
    write_text(dir / path, normalize_newlines(pkg.find_resource(path)->text));
  }
  if (paths.empty() && fs::is_directory(refs) && fs::is_empty(refs)) fs::remove(refs, ec);
}

LayerMetrics layer_metrics(const SkillPackage& pkg) {
  LayerMetrics m;
  m.l2_lines = count_lines(pkg.body);
  m.l2_words = count_words(pkg.body);
  m.l2_chars = count_chars(pkg.body);
  m.l3_files = pkg.resources.size();
  for (const Resource& r : pkg.resources) {
    m.l3_words += count_words(r.text);
    m.l3_chars += count_chars(r.text);
  }
  return m;
}

std::vector<Violation> validate(const SkillPackage& pkg) {
  std::vector<Violation> out;
  if (trim(pkg.header.name()).empty()) out.push_back({ViolationKind::kMissingName, "header.name"});
  if (trim(pkg.header.description()).empty()) out.push_back({ViolationKind::kMissingDescription, "header.description"});
  if (trim(pkg.body).empty()) out.push_back({ViolationKind::kEmptyBody, std::string(kSkillBodyFile)});
  std::set<std::string_view> seen;
  for (const Resource& r : pkg.resources) {
    if (!is_legal_resource_path(r.path)) out.push_back({ViolationKind::kIllegalResourcePath, r.path});
    if (!seen.insert(r.path).second) out.push_back({ViolationKind::kDuplicateResource, r.path});
  }
  return out;
}

std::string render_skill_tree(const SkillPackage& pkg) {
  std::string out = "=== " + std::string(kSkillBodyFile) + " ===\n" + pkg.render_skill_file();
  for (const Resource& r : pkg.resources) {
    if (!out.empty() && out.back() != '\n') out += '\n';
    out += "=== " + r.path + " ===\n" + r.text;
  }
  if (!out.empty() && out.back() != '\n') out += '\n';
  return out;
}

std::uint64_t package_hash(const SkillPackage& pkg) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xFF;
    h *= 1099511628211ULL;
  };
  mix(pkg.render_skill_file());
  for (const Resource& r : pkg.resources) {
    mix(r.path);
    mix(r.text);
  }
  return h;
}

}  // namespace skilltune
