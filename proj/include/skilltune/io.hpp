// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace skilltune {

using Json = nlohmann::json;

// Filesystem helpers. All failures surface as Error(kIoFailure).
std::string read_text(const std::filesystem::path& path);
/// Writes through a sibling temp file and renames, creating parent dirs.
void write_text(const std::filesystem::path& path, const std::string& text);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed, sorted keys, trailing newline.
void write_json(const std::filesystem::path& path, const Json& value);

/// Replaces CRLF and lone CR with LF.
std::string normalize_newlines(std::string text);

}  // namespace skilltune
