// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace skilltune {

/// Runs one command line (without the program name). Returns the exit
/// status; errors are reported on `err` as a single line.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Verb summary printed for unknown or missing verbs.
std::string usage_text();

}  // namespace skilltune
