// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace skilltune {

/// Prompt templates by name: the five role names plus `patcher_momentum`
/// (memory/overlay block spliced into the patcher prompt) and `repair`.
/// Built-in copies of prompts/*.txt are compiled in; a directory may
/// override any subset.
class PromptLibrary {
 public:
  static PromptLibrary defaults();
  /// Defaults overridden by every `<name>.txt` present in `dir`.
  static PromptLibrary with_overrides(const std::filesystem::path& dir);

  const std::string& get(std::string_view name) const;
  void set(std::string name, std::string text) { templates_[std::move(name)] = std::move(text); }

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

}  // namespace skilltune
