// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace skilltune {

inline constexpr std::string_view kSkillBodyFile = "SKILL.md";
inline constexpr std::string_view kReferencesDir = "references";

/// One line-group of the front-matter block. Entries with an empty key are
/// comments or blank lines carried verbatim.
struct HeaderEntry {
  std::string key;
  std::string raw_value;  // text after "key:", continuation lines included

  bool operator==(const HeaderEntry&) const = default;
};

/// The metadata header (L1). Unknown keys, their order and their exact
/// spelling are preserved so an unedited header re-serializes byte for byte.
class Metadata {
 public:
  Metadata() = default;

  /// `block` is the text strictly between the two `---` delimiter lines.
  static Metadata parse(std::string_view block);
  std::string serialize() const;

  std::string name() const { return get("name").value_or(""); }
  std::string description() const { return get("description").value_or(""); }

  /// Scalar value of `key` with quotes and block indicators removed.
  std::optional<std::string> get(std::string_view key) const;
  /// Replaces the value of an existing key in place, or appends a new key.
  void set(std::string_view key, std::string_view value);

  /// Keys other than name/description, in file order.
  std::vector<std::pair<std::string, std::string>> extra() const;
  const std::vector<HeaderEntry>& entries() const { return entries_; }

  bool operator==(const Metadata&) const = default;

 private:
  std::vector<HeaderEntry> entries_;
};

struct Resource {
  std::string path;  // references/<name>.md
  std::string text;

  bool operator==(const Resource&) const = default;
};

/// The optimizable skill: header H, always-loaded body B, reference set Q.
struct SkillPackage {
  Metadata header;
  std::string body;
  std::vector<Resource> resources;  // sorted by path after load

  const Resource* find_resource(std::string_view path) const;
  /// Full SKILL.md text: delimited header followed by the body.
  std::string render_skill_file() const;

  bool operator==(const SkillPackage&) const = default;
};

struct LayerMetrics {
  std::size_t l2_lines = 0;
  std::size_t l2_words = 0;
  std::size_t l2_chars = 0;
  std::size_t l3_files = 0;
  std::size_t l3_words = 0;
  std::size_t l3_chars = 0;

  bool operator==(const LayerMetrics&) const = default;
};

enum class ViolationKind { kIllegalResourcePath, kDuplicateResource, kEmptyBody, kMissingName, kMissingDescription };

struct Violation {
  ViolationKind kind;
  std::string element;

  bool operator==(const Violation&) const = default;
};

std::string_view to_string(ViolationKind kind);

// Text measures shared by layer metrics and patch magnitude.
std::size_t count_words(std::string_view text);
/// Newline-delimited segments; a trailing newline does not open a new line.
std::size_t count_lines(std::string_view text);
/// UTF-8 code points.
std::size_t count_chars(std::string_view text);

/// True for `references/<name>.md` where name is a single safe path segment.
bool is_legal_resource_path(std::string_view path);

/// Splits SKILL.md text into header and body. Throws kMalformedFrontMatter.
std::pair<Metadata, std::string> parse_skill_file(std::string_view text);

SkillPackage load_package(const std::filesystem::path& dir);
/// Deterministic: LF line endings, resources written in path order, stale
/// reference files removed. Throws kIllegalResourcePath or kIoFailure.
void save_package(const SkillPackage& pkg, const std::filesystem::path& dir);

LayerMetrics layer_metrics(const SkillPackage& pkg);
std::vector<Violation> validate(const SkillPackage& pkg);

/// Whole tree as one prompt block: SKILL.md first, then each reference,
/// each under a "=== <path> ===" banner.
std::string render_skill_tree(const SkillPackage& pkg);

/// Stable content hash (FNV-1a over the rendered tree), for snapshot identity checks.
std::uint64_t package_hash(const SkillPackage& pkg);

}  // namespace skilltune
