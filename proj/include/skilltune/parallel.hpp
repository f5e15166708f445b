// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace skilltune {

/// Runs fn(0..n-1) on up to `max_workers` threads. If any call throws, the
/// exception of the lowest index is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t max_workers, const std::function<void(std::size_t)>& fn);

}  // namespace skilltune
