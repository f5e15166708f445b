// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/prompts.hpp"

#include <array>
#include <utility>

#include "skilltune/error.hpp"
#include "skilltune/io.hpp"

namespace skilltune {

namespace {

// Generated from prompts/*.txt at configure time.
#include "default_prompts.inc"

}  // namespace

PromptLibrary PromptLibrary::defaults() {
  PromptLibrary lib;
  for (const auto& [name, text] : kDefaultPrompts) lib.templates_.emplace(name, text);
  return lib;
}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
  PromptLibrary lib = defaults();
  for (const auto& [name, text] : kDefaultPrompts) {
    std::filesystem::path file = dir / (std::string(name) + ".txt");
    if (std::filesystem::is_regular_file(file)) lib.templates_[std::string(name)] = normalize_newlines(read_text(file));
  }
  return lib;
}

const std::string& PromptLibrary::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error(ErrorKind::kInvalidArgument, "no prompt template '" + std::string(name) + "'");
  return it->second;
}

}  // namespace skilltune
